use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{norm_pdf, KyleParams};
use crate::bridge::TERMINAL_GUARD;
use crate::error::{ensure_param, Error, Result};
use crate::quad::integrate;

/// Which h-transform: conditioned on ending above `y0` or below it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KbType {
    High,
    Low,
}

impl KbType {
    fn drift(self, params: &KyleParams, y: f64, t: f64) -> f64 {
        match self {
            KbType::High => params.drift_high(y, t),
            KbType::Low => params.drift_low(y, t),
        }
    }
}

/// Euler path of `Y0` with the accumulated drift (`B0` for the high type,
/// `-S0` for the low type).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionPath {
    pub kind: KbType,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub drift_integral: Vec<f64>,
}

impl DiffusionPath {
    /// Value at the last grid time `<= t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.times.partition_point(|&s| s <= t);
        self.values[n.saturating_sub(1)]
    }

    /// `B0_1` or `S0_1`, both nonnegative.
    pub fn cumulative_orders(&self) -> f64 {
        self.drift_integral.last().copied().unwrap_or(0.0).abs()
    }
}

/// Observation-time values of one path, without the full grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbSample {
    pub observed: Vec<f64>,
    pub terminal: f64,
    /// `B0_1` or `S0_1`, both nonnegative.
    pub cumulative_orders: f64,
}

const MAX_HALVINGS: u32 = 20;
/// Uniform steps stop once `1 - t` falls below this many base steps;
/// afterwards steps shrink geometrically with `1 - t`.
const GEOMETRIC_SWITCH: f64 = 10.0;
const GEOMETRIC_FRACTION: f64 = 0.1;

/// Drives the Euler scheme on `[0, 1 - TERMINAL_GUARD]`, calling `visit`
/// after each step with `(t, y, drift integral)`. `stops` must be sorted;
/// the grid hits each of them exactly.
fn euler<R: Rng + ?Sized>(
    kind: KbType,
    params: &KyleParams,
    step: f64,
    stops: &[f64],
    rng: &mut R,
    mut visit: impl FnMut(f64, f64, f64),
) -> Result<()> {
    ensure_param(step > 0.0 && step <= 1e-3, "kb_step", || {
        format!("must lie in (0, 1e-3], got {step}")
    })?;
    let end = 1.0 - TERMINAL_GUARD;
    let (mut t, mut y, mut acc) = (0.0f64, 0.0f64, 0.0f64);
    let mut next_stop = 0;
    visit(t, y, acc);
    while t < end {
        let remaining = 1.0 - t;
        let mut dt = if remaining > GEOMETRIC_SWITCH * step {
            step
        } else {
            GEOMETRIC_FRACTION * remaining
        };
        while next_stop < stops.len() && stops[next_stop] <= t {
            next_stop += 1;
        }
        let mut landing = end;
        if let Some(&s) = stops.get(next_stop) {
            landing = landing.min(s);
        }
        let lands = landing - t <= dt;
        if lands {
            dt = landing - t;
        }
        let drift = kind.drift(params, y, t);
        let mut halvings = 0;
        let before = dt;
        while (drift * dt).abs() > 0.5 {
            if halvings == MAX_HALVINGS {
                return Err(Error::StepInstability { t, halvings });
            }
            dt *= 0.5;
            halvings += 1;
        }
        let z: f64 = rng.sample(StandardNormal);
        y += drift * dt + dt.sqrt() * z;
        acc += drift * dt;
        // land exactly on stops so observations are not shifted by rounding
        t = if lands && dt == before { landing } else { t + dt };
        visit(t, y, acc);
    }
    Ok(())
}

/// Full Euler path with the given observation times inserted into the grid.
pub fn simulate_kb<R: Rng + ?Sized>(
    kind: KbType,
    params: &KyleParams,
    step: f64,
    observe: &[f64],
    rng: &mut R,
) -> Result<DiffusionPath> {
    let mut stops = observe.to_vec();
    stops.sort_by(f64::total_cmp);
    let mut path = DiffusionPath {
        kind,
        times: Vec::new(),
        values: Vec::new(),
        drift_integral: Vec::new(),
    };
    euler(kind, params, step, &stops, rng, |t, y, a| {
        path.times.push(t);
        path.values.push(y);
        path.drift_integral.push(a);
    })?;
    Ok(path)
}

/// Values at `observe` (sorted ascending), the value at `1 - TERMINAL_GUARD`
/// and the cumulative orders, without storing the grid.
pub fn sample_kb<R: Rng + ?Sized>(
    kind: KbType,
    params: &KyleParams,
    step: f64,
    observe: &[f64],
    rng: &mut R,
) -> Result<KbSample> {
    let mut observed = Vec::with_capacity(observe.len());
    let (mut terminal, mut acc) = (0.0, 0.0);
    let mut i = 0;
    euler(kind, params, step, observe, rng, |t, y, a| {
        while i < observe.len() && observe[i] <= t {
            observed.push(y);
            i += 1;
        }
        terminal = y;
        acc = a;
    })?;
    Ok(KbSample {
        observed,
        terminal,
        cumulative_orders: acc.abs(),
    })
}

/// Density of `Y0_t` for one type: a Brownian marginal reweighted by the
/// conditional probability of ending on the right side of `y0`.
pub fn kb_marginal_density(kind: KbType, params: &KyleParams, t: f64, y: f64) -> f64 {
    let gauss = norm_pdf(y / t.sqrt()) / t.sqrt();
    let p = params.p0(y, t);
    match kind {
        KbType::High => gauss * p / params.prior_high,
        KbType::Low => gauss * (1.0 - p) / (1.0 - params.prior_high),
    }
}

/// `P(Y0_t <= y)` for one type.
pub fn kb_marginal_cdf(kind: KbType, params: &KyleParams, t: f64, y: f64) -> Result<f64> {
    let lo = -12.0 * t.sqrt() - params.y0.abs();
    if y <= lo {
        return Ok(0.0);
    }
    let hi = 12.0 * t.sqrt() + params.y0.abs();
    // integrate the shorter side against the known total mass of one
    if y < 0.5 * (lo + hi) {
        integrate(|u| kb_marginal_density(kind, params, t, u), lo, y, 1e-12)
    } else {
        let upper = integrate(|u| kb_marginal_density(kind, params, t, u), y, hi.max(y), 1e-12)?;
        Ok(1.0 - upper)
    }
}
