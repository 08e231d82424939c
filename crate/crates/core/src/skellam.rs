//! The symmetric Skellam law: the difference of two independent Poisson
//! variables with a common mean `mu`. Its pmf is `e^{-2mu} I_|k|(2mu)`.
//!
//! Tail sums run the Bessel recurrence backwards from a truncation order
//! where the terms have dropped below `e^{-40}` of the first one, which keeps
//! every evaluation `O(sqrt(mu))` and free of cancellation. Lower-tail
//! quantities are obtained by symmetry, so both tails keep full relative
//! accuracy.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bessel::ln_bessel_i_scaled;
use crate::error::{ensure_param, Error, Result};

/// Common mean of the two Poisson components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkellamParams {
    mu: f64,
}

impl SkellamParams {
    pub fn new(mu: f64) -> Result<Self> {
        ensure_param(mu >= 0.0 && mu.is_finite(), "mu", || {
            format!("must be finite and >= 0, got {mu}")
        })?;
        Ok(Self { mu })
    }

    /// Parameters of `Z_{t+h} - Z_t` for noise intensity `beta`.
    pub fn over_horizon(beta: f64, horizon: f64) -> Result<Self> {
        Self::new(beta * horizon)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// Jump times of the two noise components on `[0, horizon)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JumpTimes {
    pub buys: Vec<f64>,
    pub sells: Vec<f64>,
}

/// `ln P(K = k)`.
pub fn ln_pmf(k: i64, params: SkellamParams) -> f64 {
    if params.mu == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_bessel_i_scaled(k.unsigned_abs(), 2.0 * params.mu).expect("validated mu")
}

/// `P(K = k)`.
pub fn pmf(k: i64, params: SkellamParams) -> f64 {
    ln_pmf(k, params).exp()
}

/// `ln P(K >= k)`.
pub fn ln_survival(k: i64, params: SkellamParams) -> f64 {
    if params.mu == 0.0 {
        return if k <= 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if k >= 1 {
        upper_tail(k as u64, params.mu).ln_sum
    } else {
        ln_one_minus_exp(upper_tail((1 - k) as u64, params.mu).ln_sum)
    }
}

/// `P(K >= k)`.
pub fn survival(k: i64, params: SkellamParams) -> f64 {
    ln_survival(k, params).exp()
}

/// `ln P(K <= k)`.
pub fn ln_cdf(k: i64, params: SkellamParams) -> f64 {
    // P(K <= k) = P(K >= -k)
    ln_survival(-k, params)
}

/// `P(K <= k)`.
pub fn cdf(k: i64, params: SkellamParams) -> f64 {
    ln_cdf(k, params).exp()
}

/// Smallest `k` with `cdf(k) >= q`, for `q` in `(0, 1]`.
pub fn quantile(q: f64, params: SkellamParams) -> Result<i64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0, 1], got {q}")));
    }
    if params.mu == 0.0 {
        return Ok(0);
    }
    let sd = (2.0 * params.mu).sqrt();
    let reach = (40.0 * sd + 50.0) as i64;
    let z = if q < 1.0 {
        Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(q)
    } else {
        f64::INFINITY
    };
    let mut k = (z * sd).round().clamp(-(reach as f64), reach as f64) as i64;
    if cdf(k, params) >= q {
        while cdf(k - 1, params) >= q {
            k -= 1;
        }
    } else {
        k += 1;
        while cdf(k, params) < q {
            k += 1;
        }
    }
    Ok(k)
}

/// Draws one Skellam variate as a difference of Poisson draws.
pub fn sample<R: Rng + ?Sized>(params: SkellamParams, rng: &mut R) -> i64 {
    if params.mu == 0.0 {
        return 0;
    }
    let poisson = Poisson::new(params.mu).expect("positive mean");
    let a: f64 = poisson.sample(rng);
    let b: f64 = poisson.sample(rng);
    a as i64 - b as i64
}

/// Jump times of two independent rate-`beta` Poisson processes on
/// `[0, horizon)`, built from exponential inter-arrival times. Buys are drawn
/// first, then sells, from the same stream.
pub fn sample_noise_jumps<R: Rng + ?Sized>(beta: f64, horizon: f64, rng: &mut R) -> Result<JumpTimes> {
    ensure_param(beta > 0.0 && beta.is_finite(), "beta", || {
        format!("must be positive, got {beta}")
    })?;
    ensure_param(horizon > 0.0 && horizon <= 1.0, "horizon", || {
        format!("must lie in (0, 1], got {horizon}")
    })?;
    let draw = |rng: &mut R| {
        let mut times = Vec::new();
        let mut t = 0.0;
        loop {
            let e: f64 = Exp1.sample(rng);
            t += e / beta;
            if t >= horizon {
                break times;
            }
            times.push(t);
        }
    };
    let buys = draw(rng);
    let mut sells = draw(rng);
    // coincident times have probability zero but would break the ledger
    sells.retain(|t| buys.binary_search_by(|b| b.total_cmp(t)).is_err());
    Ok(JumpTimes { buys, sells })
}

/// Log-domain values around index `m` needed by the bridge intensities.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TailNeighborhood {
    /// `ln P(K >= m)`
    pub ln_survival: f64,
    /// `ln P(K = m)`
    pub ln_pmf_at: f64,
    /// `ln P(K = m - 1)`
    pub ln_pmf_below: f64,
}

/// One backward pass yielding `P(K >= m)`, `P(K = m)` and `P(K = m - 1)`.
pub(crate) fn tail_neighborhood(m: i64, params: SkellamParams) -> TailNeighborhood {
    if params.mu == 0.0 {
        let ln_point = |k: i64| if k == 0 { 0.0 } else { f64::NEG_INFINITY };
        return TailNeighborhood {
            ln_survival: if m <= 0 { 0.0 } else { f64::NEG_INFINITY },
            ln_pmf_at: ln_point(m),
            ln_pmf_below: ln_point(m - 1),
        };
    }
    if m >= 1 {
        let tail = upper_tail(m as u64, params.mu);
        TailNeighborhood {
            ln_survival: tail.ln_sum,
            ln_pmf_at: tail.ln_first,
            ln_pmf_below: tail.ln_prev,
        }
    } else {
        // P(K >= m) = 1 - P(K >= 1 - m); pmf is symmetric so
        // pmf(m - 1) = pmf(1 - m) and pmf(m) = pmf(-m).
        let tail = upper_tail((1 - m) as u64, params.mu);
        TailNeighborhood {
            ln_survival: ln_one_minus_exp(tail.ln_sum),
            ln_pmf_at: tail.ln_prev,
            ln_pmf_below: tail.ln_first,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct UpperTail {
    ln_first: f64,
    ln_prev: f64,
    ln_sum: f64,
}

/// Drop in log-pmf below which further terms are ignored (`e^-40 ~ 4e-18`).
const TRUNCATION_LOG_DROP: f64 = -40.0;

/// `sum_{j >= k} e^{-2mu} I_j(2mu)` for `k >= 1`.
fn upper_tail(k: u64, mu: f64) -> UpperTail {
    debug_assert!(k >= 1 && mu > 0.0);
    let x = 2.0 * mu;
    let ln_k = ln_bessel_i_scaled(k, x).expect("positive argument");
    let mut d = (9.0 * x.sqrt()).ceil() as u64 + 2;
    let (top, ln_top) = loop {
        let ln_n = ln_bessel_i_scaled(k + d, x).expect("positive argument");
        if ln_n - ln_k < TRUNCATION_LOG_DROP {
            break (k + d, ln_n);
        }
        d *= 2;
    };
    let ratio = (ln_bessel_i_scaled(top + 1, x).expect("positive argument") - ln_top).exp();

    // Values are tracked relative to I_top with a running log offset so that
    // very steep tails cannot overflow.
    let mut offset = ln_top;
    let mut above = ratio;
    let mut current = 1.0;
    // geometric bound on everything past `top`; ratios decrease with order
    let mut sum = 1.0 / (1.0 - ratio);
    let mut n = top;
    while n > k {
        let below = above + (2.0 * n as f64 / x) * current;
        above = current;
        current = below;
        sum += current;
        n -= 1;
        if current > 1e250 {
            above *= 1e-250;
            current *= 1e-250;
            sum *= 1e-250;
            offset += 250.0 * std::f64::consts::LN_10;
        }
    }
    let prev = above + (2.0 * k as f64 / x) * current;
    UpperTail {
        ln_first: offset + current.ln(),
        ln_prev: offset + prev.ln(),
        ln_sum: offset + sum.ln(),
    }
}

/// `ln(1 - e^a)` for `a <= 0`.
pub(crate) fn ln_one_minus_exp(a: f64) -> f64 {
    if a < -std::f64::consts::LN_2 {
        (-a.exp()).ln_1p()
    } else {
        (-a.exp_m1()).ln()
    }
}
