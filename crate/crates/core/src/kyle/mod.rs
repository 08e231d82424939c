//! The Kyle-Back limit: price `p0`, depth, the h-transformed diffusions of
//! the two insider types, and the lattice objects they are compared with
//! along the sweep `beta = 1 / (2 delta^2)`.

mod diffusion;
mod sweep;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::bessel::bessel_i_scaled;
use crate::config::{convergence_beta, ExperimentConfig};
use crate::error::{ensure_param, Result};
use crate::law::{ln_pricing_p_beta, LatticeState};

pub use diffusion::{kb_marginal_cdf, kb_marginal_density, sample_kb, simulate_kb, DiffusionPath, KbSample, KbType};
pub use sweep::{convergence_report, grid_errors, ConvergenceReport, ConvergenceRow, GridErrors, MonotoneFlags};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal cdf.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `phi(x) / Phi(x)`, stable for very negative `x` where both underflow.
pub fn inverse_mills(x: f64) -> f64 {
    if x > -5.0 {
        return norm_pdf(x) / norm_cdf(x);
    }
    // Phi(x) / phi(x) = R(u), u = -x, by its continued fraction
    let u = -x;
    let mut tail = u;
    for k in (1..=80).rev() {
        tail = u + k as f64 / tail;
    }
    tail
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KyleParams {
    pub prior_high: f64,
    /// `Phi^{-1}(1 - prior_high)`.
    pub y0: f64,
}

impl KyleParams {
    pub fn new(prior_high: f64) -> Result<Self> {
        ensure_param(prior_high > 0.0 && prior_high < 1.0, "prior_high", || {
            format!("must lie in (0, 1), got {prior_high}")
        })?;
        let target = 1.0 - prior_high;
        let mut y0 = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(target);
        // the library inverse is only good to about 1e-9 in the tails
        for _ in 0..3 {
            y0 -= (norm_cdf(y0) - target) / norm_pdf(y0);
        }
        if prior_high == 0.5 {
            y0 = 0.0;
        }
        Ok(Self { prior_high, y0 })
    }

    fn scaled(&self, y: f64, t: f64) -> (f64, f64) {
        let s = (1.0 - t).sqrt();
        ((y - self.y0) / s, s)
    }

    /// `p0(y, t) = Phi((y - y0) / sqrt(1 - t))`; the indicator at `t >= 1`.
    pub fn p0(&self, y: f64, t: f64) -> f64 {
        if t >= 1.0 {
            return if y >= self.y0 { 1.0 } else { 0.0 };
        }
        norm_cdf(self.scaled(y, t).0)
    }

    /// `d/dy p0`.
    pub fn depth0(&self, y: f64, t: f64) -> f64 {
        let (x, s) = self.scaled(y, t);
        norm_pdf(x) / s
    }

    /// Drift of the high type, `depth0 / p0`.
    pub fn drift_high(&self, y: f64, t: f64) -> f64 {
        let (x, s) = self.scaled(y, t);
        inverse_mills(x) / s
    }

    /// Drift of the low type, `-depth0 / (1 - p0)`.
    pub fn drift_low(&self, y: f64, t: f64) -> f64 {
        let (x, s) = self.scaled(y, t);
        -inverse_mills(-x) / s
    }
}

/// Glosten-Milgrom objects at order size `delta` in real coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmLattice {
    pub delta: f64,
    pub beta: f64,
    /// Threshold in lattice steps; `y_delta = z delta`.
    pub z: i64,
    pub realized_prior: f64,
}

impl GmLattice {
    /// `beta = 1 / (2 delta^2)` and `y_delta` from the prior quantile.
    pub fn from_prior(delta: f64, prior_high: f64) -> Result<Self> {
        let sel = ExperimentConfig::for_convergence(delta, prior_high).target_selection()?;
        Ok(Self {
            delta,
            beta: convergence_beta(delta),
            z: sel.y_target,
            realized_prior: sel.realized_prior,
        })
    }

    pub fn y_delta(&self) -> f64 {
        self.z as f64 * self.delta
    }

    /// Nearest lattice index to `y` and the rounding offset `y - k delta`.
    pub fn nearest(&self, y: f64) -> (i64, f64) {
        let k = (y / self.delta).round() as i64;
        (k, y - k as f64 * self.delta)
    }

    fn p_at(&self, k: i64, t: f64) -> f64 {
        ln_pricing_p_beta(self.z, LatticeState::new(k, t), self.beta).exp()
    }

    pub fn price(&self, y: f64, t: f64) -> f64 {
        self.p_at(self.nearest(y).0, t)
    }

    pub fn ask(&self, y: f64, t: f64) -> f64 {
        self.p_at(self.nearest(y).0 + 1, t)
    }

    pub fn bid(&self, y: f64, t: f64) -> f64 {
        self.p_at(self.nearest(y).0 - 1, t)
    }

    pub fn spread(&self, y: f64, t: f64) -> f64 {
        self.ask(y, t) - self.bid(y, t)
    }

    /// `(a - p) / delta` from survival differences.
    pub fn depth_ask(&self, y: f64, t: f64) -> f64 {
        let k = self.nearest(y).0;
        (self.p_at(k + 1, t) - self.p_at(k, t)) / self.delta
    }

    /// `(p - b) / delta` from survival differences.
    pub fn depth_bid(&self, y: f64, t: f64) -> f64 {
        let k = self.nearest(y).0;
        (self.p_at(k, t) - self.p_at(k - 1, t)) / self.delta
    }

    /// `exp(-x) I_n(x) / delta` with `x = (1 - t) / delta^2`, `n = |z - k - 1|`.
    pub fn depth_ask_bessel(&self, y: f64, t: f64) -> Result<f64> {
        let k = self.nearest(y).0;
        self.bessel_depth(self.z - k - 1, t)
    }

    /// Bid-side analogue with `n = |z - k|`.
    pub fn depth_bid_bessel(&self, y: f64, t: f64) -> Result<f64> {
        let k = self.nearest(y).0;
        self.bessel_depth(self.z - k, t)
    }

    fn bessel_depth(&self, n: i64, t: f64) -> Result<f64> {
        let x = 2.0 * self.beta * (1.0 - t);
        Ok(bessel_i_scaled(n.unsigned_abs(), x)? / self.delta)
    }
}

#[cfg(test)]
mod tests;
