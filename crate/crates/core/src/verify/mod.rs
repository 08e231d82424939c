//! Statistical checks binding simulated ledgers to the properties they must
//! have: law of `Y`, independence of its components, the filter identity,
//! the martingale property of the likelihood ratio and rational pricing.

pub mod stats;
mod traceability;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bridge::BridgePath;
use crate::equilibrium::PricingRule;
use crate::error::{Error, Result};
use crate::law::{h, likelihood_ratio, BridgeLawParams, LatticeState};
use crate::skellam::{self, SkellamParams};

pub use stats::{chi_square_gof, contingency_chi_square, ks_two_sample, mean_se, wilson, ChiSquare};
pub use traceability::{traceability_markdown, TraceEntry, TRACEABILITY};

/// Default significance level of the suite.
pub const SIGNIFICANCE: f64 = 0.01;
/// Fraction of bins whose confidence interval must cover the prediction.
pub const COVERAGE_REQUIRED: f64 = 0.97;
/// Smallest bin a coverage test looks at.
pub const MIN_BIN_COUNT: usize = 200;

/// Outcome of one statistical check. Thresholds are fixed before sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    /// The result the check is bound to.
    pub anchor: String,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub interval: Option<(f64, f64)>,
    /// Level or bound the statistic is compared against.
    pub threshold: f64,
    pub pass: bool,
    pub sample_size: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub details: BTreeMap<String, f64>,
}

impl TestReport {
    fn new(name: &str, anchor: &str, statistic: f64, threshold: f64, pass: bool, sample_size: usize) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            statistic,
            p_value: None,
            interval: None,
            threshold,
            pass,
            sample_size,
            seed: None,
            details: BTreeMap::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.into(), value);
        self
    }
}

fn need(test: &'static str, have: usize, need: usize) -> Result<()> {
    if have < need {
        return Err(Error::InsufficientSample { test, have, need });
    }
    Ok(())
}

/// Chi-square goodness of fit of integer samples to `Skellam(mu)`.
pub fn chi_square_skellam(samples: &[i64], params: SkellamParams, alpha: f64) -> Result<TestReport> {
    need("chi_square_skellam", samples.len(), 1000)?;
    let lo = *samples.iter().min().expect("non-empty");
    let hi = *samples.iter().max().expect("non-empty");
    let n = samples.len() as f64;
    let width = (hi - lo + 1) as usize;
    let mut observed = vec![0.0; width];
    for &k in samples {
        observed[(k - lo) as usize] += 1.0;
    }
    let expected: Vec<f64> = (lo..=hi)
        .map(|k| {
            let p = if k == lo && k == hi {
                1.0
            } else if k == lo {
                skellam::cdf(k, params)
            } else if k == hi {
                skellam::survival(k, params)
            } else {
                skellam::pmf(k, params)
            };
            n * p
        })
        .collect();
    let chi = chi_square_gof(&observed, &expected, 0)?;
    let mut r = TestReport::new(
        "chi_square_skellam",
        "Y property (ii): Y is a difference of two Poisson processes in its own filtration",
        chi.statistic,
        alpha,
        chi.p_value > alpha,
        samples.len(),
    )
    .detail("mu", params.mu())
    .detail("dof", chi.dof as f64)
    .detail("bins", chi.bins as f64);
    r.p_value = Some(chi.p_value);
    Ok(r)
}

/// Unconditional law of `Y_t` over a batch of paths with drawn membership.
pub fn law_preservation(paths: &[BridgePath], beta: f64, times: &[f64], alpha: f64) -> Result<Vec<TestReport>> {
    let level = alpha / times.len() as f64;
    times
        .iter()
        .map(|&t| {
            let ys: Vec<i64> = paths.iter().map(|p| p.y_at(t)).collect();
            let mu = SkellamParams::new(beta * t)?;
            let mut r = chi_square_skellam(&ys, mu, level)?.detail("t", t);
            r.name = format!("law_preservation(t={t})");
            Ok(r)
        })
        .collect()
}

/// Up and down jump counts of `Y` in each window: correlation z-scores and a
/// contingency chi-square on tertile classes, Bonferroni over windows.
pub fn independence_poisson_components(paths: &[BridgePath], windows: &[(f64, f64)], alpha: f64) -> Result<TestReport> {
    need("independence_poisson_components (windows)", windows.len(), 4)?;
    need("independence_poisson_components (paths)", paths.len(), 100)?;
    for w in windows.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::Domain("windows must be disjoint and ordered".into()));
        }
    }
    let sqrt_n = (paths.len() as f64).sqrt();
    let level = alpha / windows.len() as f64;
    let mut max_z: f64 = 0.0;
    let mut min_p: f64 = 1.0;
    let mut r = TestReport::new(
        "independence_poisson_components",
        "Y property (ii): the up and down components are independent",
        0.0,
        3.0,
        true,
        paths.len(),
    );
    for (i, &(a, b)) in windows.iter().enumerate() {
        let count = |p: &BridgePath, up: bool| p.jump_times(up).filter(|&t| t > a && t <= b).count() as f64;
        let ups: Vec<f64> = paths.iter().map(|p| count(p, true)).collect();
        let downs: Vec<f64> = paths.iter().map(|p| count(p, false)).collect();
        let z = sqrt_n * stats::correlation(&ups, &downs);
        let table = tertile_table(&ups, &downs);
        let p = contingency_chi_square(&table)?.p_value;
        r.details.insert(format!("z[{i}]"), z);
        r.details.insert(format!("p[{i}]"), p);
        max_z = max_z.max(z.abs());
        min_p = min_p.min(p);
    }
    r.statistic = max_z;
    r.p_value = Some(min_p);
    r.pass = max_z < 3.0 && min_p > level;
    r.details.insert("bonferroni_level".into(), level);
    Ok(r)
}

fn tertile_cuts(xs: &[f64]) -> (f64, f64) {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    (s[s.len() / 3], s[2 * s.len() / 3])
}

fn tertile_table(x: &[f64], y: &[f64]) -> Vec<Vec<f64>> {
    let cx = tertile_cuts(x);
    let cy = tertile_cuts(y);
    let class = |v: f64, c: (f64, f64)| {
        if v < c.0 {
            0
        } else if v < c.1 {
            1
        } else {
            2
        }
    };
    let mut table = vec![vec![0.0; 3]; 3];
    for (&a, &b) in x.iter().zip(y) {
        table[class(a, cx)][class(b, cy)] += 1.0;
    }
    table
}

/// Bins paths by `(t, Y_t)` and checks that the frequency of the high type
/// lies within the Wilson interval around `predict(y, t)`.
fn coverage_test(
    name: &'static str,
    anchor: &str,
    paths: &[BridgePath],
    times: &[f64],
    min_bin: usize,
    predict: impl Fn(i64, f64) -> f64,
) -> Result<TestReport> {
    let mut bins: BTreeMap<(usize, i64), (usize, usize)> = BTreeMap::new();
    for p in paths {
        for (ti, &t) in times.iter().enumerate() {
            let e = bins.entry((ti, p.y_at(t))).or_default();
            e.0 += 1;
            e.1 += p.member_high as usize;
        }
    }
    let mut used = 0;
    let mut covered = 0;
    let mut worst: f64 = 0.0;
    for (&(ti, y), &(n, k)) in bins.iter().filter(|(_, v)| v.0 >= min_bin) {
        used += 1;
        let target = predict(y, times[ti]);
        let (lo, hi) = wilson(k, n, 0.99);
        if lo <= target && target <= hi {
            covered += 1;
        }
        worst = worst.max((k as f64 / n as f64 - target).abs());
    }
    need(name, used, 1)?;
    let frac = covered as f64 / used as f64;
    let mut r = TestReport::new(
        name,
        anchor,
        frac,
        COVERAGE_REQUIRED,
        frac >= COVERAGE_REQUIRED,
        paths.len(),
    )
    .detail("bins", used as f64)
    .detail("covered", covered as f64)
    .detail("max_abs_error", worst);
    r.interval = Some((0.0, 1.0));
    Ok(r)
}

/// `P(I | F^Y_t) = h(Y_t, t)`.
pub fn filter_identity_test(
    paths: &[BridgePath],
    law: &BridgeLawParams,
    times: &[f64],
    min_bin: usize,
) -> Result<TestReport> {
    coverage_test(
        "filter_identity",
        "Bayes formula: P(I | F^Y_t) = h(Y_t, t)",
        paths,
        times,
        min_bin,
        |y, t| h(LatticeState::new(y, t), law),
    )
}

/// `E[v | Y_t] = p^z(Y_t, t)` for the equilibrium pricing rule.
pub fn pricing_rationality_test(
    paths: &[BridgePath],
    rule: &PricingRule,
    times: &[f64],
    min_bin: usize,
) -> Result<TestReport> {
    coverage_test(
        "pricing_rationality",
        "Equilibrium (i): p is a rational pricing rule",
        paths,
        times,
        min_bin,
        |y, t| rule.price(y, t),
    )
}

/// `(l_{t1}, l_{t2})` along each path.
pub fn likelihood_ratio_pairs(
    paths: &[BridgePath],
    law: &BridgeLawParams,
    t1: f64,
    t2: f64,
) -> Result<Vec<(f64, f64)>> {
    paths
        .iter()
        .map(|p| {
            let at = |t: f64| likelihood_ratio(LatticeState::new(p.y_at(t), t), p.member_high, law);
            Ok((at(t1)?, at(t2)?))
        })
        .collect()
}

/// Checks `E[l] = 1` within 3 standard errors at both times and
/// `E[l_{t2} - l_{t1} | bin of l_{t1}] = 0` with Bonferroni over `bins`.
pub fn martingale_probe(pairs: &[(f64, f64)], bins: usize, alpha: f64) -> Result<TestReport> {
    need("martingale_probe", pairs.len(), 10 * bins.max(1))?;
    let first: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let second: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let within = |xs: &[f64]| {
        let (m, se) = mean_se(xs);
        ((m - 1.0).abs() <= 3.0 * se || (m - 1.0).abs() <= 1e-12, m, se)
    };
    let (ok1, m1, se1) = within(&first);
    let (ok2, m2, se2) = within(&second);

    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| first[a].total_cmp(&first[b]));
    let z_crit = stats::normal_quantile(1.0 - alpha / (2.0 * bins as f64));
    let mut max_z: f64 = 0.0;
    for chunk in order.chunks(pairs.len().div_ceil(bins)) {
        let diffs: Vec<f64> = chunk.iter().map(|&i| second[i] - first[i]).collect();
        let (m, se) = mean_se(&diffs);
        let z = if se > 0.0 {
            m / se
        } else if m == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        max_z = max_z.max(z.abs());
    }
    let mut r = TestReport::new(
        "martingale_probe",
        "auxiliary process l is a positive martingale",
        max_z,
        z_crit,
        ok1 && ok2 && max_z < z_crit,
        pairs.len(),
    )
    .detail("mean_first", m1)
    .detail("se_first", se1)
    .detail("mean_second", m2)
    .detail("se_second", se2);
    r.interval = Some((m2 - 3.0 * se2, m2 + 3.0 * se2));
    Ok(r)
}
