use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{value_h, value_l, PricingRule};
use crate::bridge::{BridgePath, BridgeSimulator, EventKind, EventMark, Membership, Perturbation, GUARD_TIME};
use crate::error::{Error, Result};
use crate::rng::{RngStreams, Stream};

/// Trading gains of the insider along `path`, with `v = 1` on the high type.
///
/// Lone buys execute at the ask `p(y + 1)`, lone sells at the bid `p(y - 1)`,
/// cancellations at `p(y)`, all evaluated at the pre-jump level.
pub fn realized_profit(path: &BridgePath, rule: &PricingRule) -> f64 {
    let v = if path.member_high { 1.0 } else { 0.0 };
    let mut total = 0.0;
    for e in &path.events {
        let before = e.y_after - e.kind.dy();
        let (price, buy) = match e.kind {
            EventKind::InsiderLoneBuy => (rule.price(before + 1, e.t), true),
            EventKind::InsiderLoneSell => (rule.price(before - 1, e.t), false),
            // taking the other side of a noise sell is a purchase
            EventKind::InsiderCancelSell => (rule.price(before, e.t), true),
            EventKind::InsiderCancelBuy => (rule.price(before, e.t), false),
            EventKind::NoiseBuy | EventKind::NoiseSell => continue,
        };
        total += if buy { v - price } else { price - v };
    }
    total * rule.delta
}

/// Strategies compared against the equilibrium one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "rate")]
pub enum StrategyVariant {
    Equilibrium,
    /// Equilibrium lone orders, but opposite noise orders are never taken.
    NeverCancel,
    /// Equilibrium plus wrong-side orders at the given rate.
    Bluffing(f64),
    /// Lone orders in the insider's direction at a constant rate, nothing else.
    ConstantRate(f64),
}

impl StrategyVariant {
    pub fn name(&self) -> String {
        match self {
            Self::Equilibrium => "equilibrium".into(),
            Self::NeverCancel => "never_cancel".into(),
            Self::Bluffing(e) => format!("bluffing({e})"),
            Self::ConstantRate(l) => format!("constant_rate({l})"),
        }
    }

    /// Variants expected to be strictly worse than the equilibrium.
    pub fn strictly_suboptimal(&self) -> bool {
        match self {
            Self::Equilibrium => false,
            Self::NeverCancel => true,
            Self::Bluffing(e) => *e > 0.0,
            Self::ConstantRate(_) => false,
        }
    }
}

/// Path of one variant. The noise of `seed` is shared by all variants.
pub fn variant_path(
    sim: &BridgeSimulator,
    variant: StrategyVariant,
    seed: u64,
    member_high: bool,
) -> Result<BridgePath> {
    let membership = if member_high { Membership::High } else { Membership::Low };
    match variant {
        StrategyVariant::Equilibrium => sim.build_path(seed, membership),
        StrategyVariant::Bluffing(rate) => {
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "bluff_rate",
                    reason: format!("must be nonnegative, got {rate}"),
                });
            }
            sim.build_perturbed(seed, membership, &Perturbation { bluff_rate: rate })
        }
        StrategyVariant::NeverCancel => {
            let eq = sim.build_path(seed, membership)?;
            let events = eq
                .events
                .iter()
                .map(|e| EventMark {
                    kind: match e.kind {
                        EventKind::InsiderCancelSell => EventKind::NoiseSell,
                        EventKind::InsiderCancelBuy => EventKind::NoiseBuy,
                        k => k,
                    },
                    ..*e
                })
                .collect();
            Ok(relabel(eq.seed, member_high, events))
        }
        StrategyVariant::ConstantRate(rate) => {
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "constant_rate",
                    reason: format!("must be nonnegative, got {rate}"),
                });
            }
            let noise = sim.noise(seed)?;
            let mut events: Vec<EventMark> = noise
                .buys
                .iter()
                .map(|&t| mark(t, EventKind::NoiseBuy))
                .chain(noise.sells.iter().map(|&t| mark(t, EventKind::NoiseSell)))
                .collect();
            if rate > 0.0 {
                let own = if member_high {
                    EventKind::InsiderLoneBuy
                } else {
                    EventKind::InsiderLoneSell
                };
                let mut rng = RngStreams::for_seed(seed, Stream::Perturbation);
                let exp = Exp::new(rate).expect("positive rate");
                let mut t = 0.0;
                loop {
                    t += exp.sample(&mut rng);
                    if t >= GUARD_TIME {
                        break;
                    }
                    events.push(mark(t, own));
                }
            }
            events.sort_by(|a, b| a.t.total_cmp(&b.t));
            Ok(relabel(seed, member_high, events))
        }
    }
}

fn mark(t: f64, kind: EventKind) -> EventMark {
    EventMark { t, kind, y_after: 0 }
}

/// Recomputes the running level of a re-labelled ledger.
fn relabel(seed: u64, member_high: bool, mut events: Vec<EventMark>) -> BridgePath {
    let mut y = 0;
    for e in &mut events {
        y += e.kind.dy();
        e.y_after = y;
    }
    BridgePath {
        seed,
        member_high,
        terminal_y: y,
        events,
        guard_resolutions: 0,
    }
}

/// Profit statistics of one variant against the equilibrium on shared noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub variant: StrategyVariant,
    pub name: String,
    pub n: usize,
    pub mean: f64,
    pub se: f64,
    /// Mean of `equilibrium - variant` over paired paths.
    pub paired_gap: f64,
    pub paired_gap_se: f64,
    /// One-sided p-value for `variant < equilibrium`.
    pub p_value_below: f64,
    /// `mean <= value + 3 se`.
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub member_high: bool,
    /// `H(0, 0)` or `L(0, 0)`.
    pub value: f64,
    pub n_paths: usize,
    pub master_seed: u64,
    pub significance: f64,
    pub equilibrium: VariantResult,
    pub variants: Vec<VariantResult>,
    /// `|mean - value| <= 3 se` for the equilibrium.
    pub equilibrium_matches_value: bool,
    pub pass: bool,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn one_sided_p(gap: f64, se: f64, n: usize) -> f64 {
    if se == 0.0 {
        return if gap > 0.0 { 0.0 } else { 1.0 };
    }
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("dof >= 1");
    t.sf(gap / se)
}

/// Monte Carlo profits of each variant on `n_paths` shared-noise paths of one
/// type, compared with the value at the origin.
pub fn optimality_mc(
    sim: &BridgeSimulator,
    rule: &PricingRule,
    variants: &[StrategyVariant],
    member_high: bool,
    n_paths: usize,
    master_seed: u64,
    significance: f64,
) -> Result<OptimalityReport> {
    if n_paths < 2 {
        return Err(Error::InsufficientSample {
            test: "optimality_mc",
            have: n_paths,
            need: 2,
        });
    }
    let value = if member_high {
        value_h(0, 0.0, rule, 1e-10)?
    } else {
        value_l(0, 0.0, rule, 1e-10)?
    };
    let streams = RngStreams::new(master_seed);
    let seeds: Vec<u64> = (0..n_paths as u64).map(|i| streams.path_seed(i)).collect();
    let profits = |variant| -> Result<Vec<f64>> {
        seeds
            .iter()
            .map(|&s| Ok(realized_profit(&variant_path(sim, variant, s, member_high)?, rule)))
            .collect()
    };
    let eq = profits(StrategyVariant::Equilibrium)?;
    let summarize = |variant: StrategyVariant, xs: &[f64]| {
        let (mean, se) = mean_se(xs);
        let gaps: Vec<f64> = eq.iter().zip(xs).map(|(a, b)| a - b).collect();
        let (gap, gap_se) = mean_se(&gaps);
        VariantResult {
            variant,
            name: variant.name(),
            n: xs.len(),
            mean,
            se,
            paired_gap: gap,
            paired_gap_se: gap_se,
            p_value_below: if variant == StrategyVariant::Equilibrium {
                1.0
            } else {
                one_sided_p(gap, gap_se, xs.len())
            },
            within_bound: mean <= value + 3.0 * se,
        }
    };
    let equilibrium = summarize(StrategyVariant::Equilibrium, &eq);
    let mut results = Vec::new();
    for &v in variants.iter().filter(|v| **v != StrategyVariant::Equilibrium) {
        let xs = profits(v)?;
        results.push(summarize(v, &xs));
    }
    let matches = (equilibrium.mean - value).abs() <= 3.0 * equilibrium.se;
    let pass = matches
        && results
            .iter()
            .all(|r| r.within_bound && (!r.variant.strictly_suboptimal() || r.p_value_below < significance));
    Ok(OptimalityReport {
        member_high,
        value,
        n_paths,
        master_seed,
        significance,
        equilibrium,
        variants: results,
        equilibrium_matches_value: matches,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::BridgeLawParams;

    fn setup(beta: f64, z: i64) -> (BridgeSimulator, PricingRule) {
        let sim = BridgeSimulator::new(BridgeLawParams::exact_match(beta, z).unwrap());
        (sim, PricingRule { beta, z, delta: 1.0 })
    }

    fn mirror(path: &BridgePath) -> BridgePath {
        let events = path
            .events
            .iter()
            .map(|e| EventMark {
                t: e.t,
                kind: match e.kind {
                    EventKind::NoiseBuy => EventKind::NoiseSell,
                    EventKind::NoiseSell => EventKind::NoiseBuy,
                    EventKind::InsiderLoneBuy => EventKind::InsiderLoneSell,
                    EventKind::InsiderLoneSell => EventKind::InsiderLoneBuy,
                    EventKind::InsiderCancelSell => EventKind::InsiderCancelBuy,
                    EventKind::InsiderCancelBuy => EventKind::InsiderCancelSell,
                },
                y_after: -e.y_after,
            })
            .collect();
        BridgePath {
            seed: path.seed,
            member_high: !path.member_high,
            terminal_y: -path.terminal_y,
            events,
            guard_resolutions: path.guard_resolutions,
        }
    }

    #[test]
    fn quiet_path_earns_nothing() {
        let (sim, rule) = setup(20.0, 1);
        let p = variant_path(&sim, StrategyVariant::ConstantRate(0.0), 9, true).unwrap();
        assert_eq!(p.insider_mark_count(), 0);
        assert_eq!(realized_profit(&p, &rule), 0.0);
    }

    #[test]
    fn high_type_terms_are_nonnegative() {
        let (sim, rule) = setup(20.0, 1);
        for seed in 0..50 {
            let p = sim.build_path(seed, Membership::High).unwrap();
            for (i, e) in p.events.iter().enumerate().filter(|(_, e)| e.kind.is_insider()) {
                let single = BridgePath {
                    events: p.events[..=i].to_vec(),
                    ..p.clone()
                };
                let before = realized_profit(
                    &BridgePath {
                        events: p.events[..i].to_vec(),
                        ..p.clone()
                    },
                    &rule,
                );
                assert!(realized_profit(&single, &rule) - before >= 0.0, "{e:?}");
            }
        }
    }

    #[test]
    fn mirror_map_preserves_profit() {
        let (sim, rule) = setup(10.0, 2);
        let mirrored_rule = PricingRule { z: 1 - rule.z, ..rule };
        for seed in 0..40 {
            for m in [Membership::High, Membership::Low] {
                let p = sim.build_path(seed, m).unwrap();
                let a = realized_profit(&p, &rule);
                let b = realized_profit(&mirror(&p), &mirrored_rule);
                assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn never_cancel_keeps_lone_orders() {
        let (sim, _) = setup(20.0, 1);
        let eq = sim.build_path(4, Membership::High).unwrap();
        let nc = variant_path(&sim, StrategyVariant::NeverCancel, 4, true).unwrap();
        let lone = |p: &BridgePath| p.events.iter().filter(|e| e.kind == EventKind::InsiderLoneBuy).count();
        assert_eq!(lone(&eq), lone(&nc));
        assert!(nc.events.iter().all(|e| e.kind != EventKind::InsiderCancelSell));
        assert_eq!(eq.events.len(), nc.events.len());
    }

    #[test]
    fn small_study_is_consistent() {
        let (sim, rule) = setup(5.0, 1);
        let rep = optimality_mc(
            &sim,
            &rule,
            &[StrategyVariant::NeverCancel, StrategyVariant::ConstantRate(0.0)],
            true,
            2000,
            11,
            0.01,
        )
        .unwrap();
        assert!(rep.equilibrium_matches_value, "{rep:?}");
        assert_eq!(rep.variants[1].mean, 0.0);
        assert!(rep.variants.iter().all(|r| r.within_bound));
    }
}
