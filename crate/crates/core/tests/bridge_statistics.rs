//! Distributional checks of the bridge simulator against oracles computed
//! independently from the conditioning kernel `h`.

use gmbridge::bridge::{compensators, simulate_paths, GUARD_TIME};
use gmbridge::law::{enlarged_intensity, h};
use gmbridge::quad::integrate;
use gmbridge::verify::{law_preservation, mean_se, SIGNIFICANCE};
use gmbridge::{BridgeLawParams, BridgeSimulator, EventKind, LatticeState, Membership, RngStreams, Side, Stream};
use rand::Rng;
use rand_distr::Exp1;

/// Lone-buy rate of the high type from the enlarged up-intensity: noise buys
/// arrive at `beta`, the rest are the insider's own orders.
fn lone_rate_oracle(law: &BridgeLawParams, y: i64, t: f64) -> f64 {
    enlarged_intensity(Side::Up, true, LatticeState::new(y, t), law).unwrap() - law.beta
}

#[test]
fn clock_first_passage_matches_intensity_oracle() {
    let law = BridgeLawParams::exact_match(20.0, 2).unwrap();
    let sim = BridgeSimulator::new(law);
    let (y, t0) = (0, 0.3);
    let m = law.y_target - y;
    let n = 100_000;
    let mut rng = RngStreams::for_seed(11, Stream::Auxiliary);
    let mut hits: Vec<f64> = (0..n)
        .map(|_| {
            let e: f64 = rng.sample(Exp1);
            sim.clock().invert(m, t0, e).unwrap().unwrap_or(f64::INFINITY)
        })
        .collect();
    hits.sort_by(f64::total_cmp);

    // one-sample KS distance on a fine grid of the oracle cdf
    let grid: Vec<f64> = (1..=400).map(|i| t0 + (0.999 - t0) * i as f64 / 400.0).collect();
    let mut cum = 0.0;
    let mut prev = t0;
    let mut d: f64 = 0.0;
    for &t in &grid {
        cum += integrate(|s| lone_rate_oracle(&law, y, s), prev, t, 1e-12).unwrap();
        prev = t;
        let oracle = 1.0 - (-cum).exp();
        let empirical = hits.partition_point(|&x| x <= t) as f64 / n as f64;
        d = d.max((oracle - empirical).abs());
    }
    // 1% critical value of the one-sample KS statistic
    let critical = 1.628 / (n as f64).sqrt();
    assert!(d < critical, "KS distance {d} above {critical}");
}

#[test]
fn marginals_are_skellam() {
    let law = BridgeLawParams::exact_match(5.0, 3).unwrap();
    let sim = BridgeSimulator::new(law);
    let paths = simulate_paths(&sim, 77, 10_000, Membership::Drawn).unwrap();
    let reports = law_preservation(&paths, 5.0, &[0.3, 0.6, 0.9, 1.0], SIGNIFICANCE).unwrap();
    for r in &reports {
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn compensated_counts_are_centred() {
    let law = BridgeLawParams::exact_match(5.0, 2).unwrap();
    let sim = BridgeSimulator::new(law);
    let paths = simulate_paths(&sim, 5, 4000, Membership::Drawn).unwrap();
    let mut up = Vec::with_capacity(paths.len());
    let mut down = Vec::with_capacity(paths.len());
    for p in &paths {
        let (a_up, a_down) = compensators(p, &sim).unwrap();
        let n_up = p.jump_times(true).filter(|&t| t < GUARD_TIME).count() as f64;
        let n_down = p.jump_times(false).filter(|&t| t < GUARD_TIME).count() as f64;
        up.push(n_up - a_up);
        down.push(n_down - a_down);
    }
    for (name, xs) in [("up", &up), ("down", &down)] {
        let (mean, se) = mean_se(xs);
        assert!(mean.abs() < 3.5 * se, "{name}: mean {mean}, se {se}");
    }
}

/// Each noise sell seen by the high type is cancelled with probability
/// `1 - h(y - 1, t) / h(y, t)`; the realized cancellations must match.
#[test]
fn cancellations_match_keep_probability() {
    let law = BridgeLawParams::exact_match(5.0, 2).unwrap();
    let sim = BridgeSimulator::new(law);
    let paths = simulate_paths(&sim, 9, 4000, Membership::High).unwrap();
    let (mut observed, mut expected, mut variance) = (0.0, 0.0, 0.0);
    for p in &paths {
        let mut y = 0;
        for e in &p.events {
            if matches!(e.kind, EventKind::NoiseSell | EventKind::InsiderCancelSell) && e.t < GUARD_TIME {
                let here = h(LatticeState::new(y, e.t), &law);
                let below = h(LatticeState::new(y - 1, e.t), &law);
                let cancel = 1.0 - below / here;
                expected += cancel;
                variance += cancel * (1.0 - cancel);
                if e.kind == EventKind::InsiderCancelSell {
                    observed += 1.0;
                }
            }
            y = e.y_after;
        }
    }
    let z = (observed - expected) / variance.sqrt();
    assert!(z.abs() < 3.5, "observed {observed}, expected {expected}, z {z}");
    assert!(observed > 100.0, "too few cancellations to be informative: {observed}");
}
