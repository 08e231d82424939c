//! Experiment configuration shared by the library drivers and the CLI.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_param, Result};
use crate::law::BridgeLawParams;
use crate::skellam::{self, SkellamParams};

/// How the lattice threshold `y1` and the prior are tied together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YTargetMode {
    /// `y1` is given; the prior is set to `h(0, 0)`.
    ExactMatch,
    /// `y1` is the lattice quantile of the requested prior and the prior is
    /// replaced by the realized `P(Z_1 >= y1)`.
    AdjustedPrior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Absolute tolerance of every adaptive quadrature.
    pub quadrature: f64,
    /// Family-wise significance level of statistical checks.
    pub significance: f64,
    /// Smallest bin population used by binned checks.
    pub min_bin_count: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            quadrature: 1e-10,
            significance: 0.01,
            min_bin_count: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Half-width of the lattice window in lattice steps; derived from `beta`
    /// when absent.
    pub window: Option<i64>,
    /// Number of time intervals of value surfaces on `[0, 1]`.
    pub time_steps: usize,
    /// Times at which simulated paths are probed.
    pub probe_times: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            window: None,
            time_steps: 4,
            probe_times: vec![0.25, 0.5, 0.75],
        }
    }
}

/// Settings of the small-order-size sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSpec {
    pub delta_list: Vec<f64>,
    pub prior_high: f64,
    /// Base Euler step of limit diffusions.
    pub kb_step: f64,
    pub paths_per_side: usize,
    pub marginal_times: Vec<f64>,
    /// Real `y` values of the depth and price grid; multiples of every swept
    /// order size keep the grid on all lattices.
    pub grid_y: Vec<f64>,
    pub grid_t: Vec<f64>,
}

impl Default for LimitSpec {
    fn default() -> Self {
        Self {
            delta_list: vec![0.2, 0.1, 0.05],
            prior_high: 0.5,
            kb_step: 1e-3,
            paths_per_side: 5000,
            marginal_times: vec![0.25, 0.5, 0.75],
            grid_y: (-10..=10).map(|i| i as f64 * 0.2).collect(),
            grid_t: vec![0.0, 0.25, 0.5, 0.75],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Order size.
    pub delta: f64,
    /// Noise intensity per unit time (in lattice jumps).
    pub beta: f64,
    pub prior_high: f64,
    pub y_target_mode: YTargetMode,
    /// Lattice threshold used in exact-match mode.
    pub y_target: Option<i64>,
    /// Enforces `beta = 1 / (2 delta^2)`.
    pub convergence: bool,
    pub seed: u64,
    pub paths: usize,
    pub grid: GridSpec,
    pub limit: LimitSpec,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            delta: 1.0,
            beta: 20.0,
            prior_high: 0.5,
            y_target_mode: YTargetMode::ExactMatch,
            y_target: Some(1),
            convergence: false,
            seed: 20_240_601,
            paths: 10_000,
            grid: GridSpec::default(),
            limit: LimitSpec::default(),
            tolerances: Tolerances::default(),
        }
    }
}

/// Result of turning a prior into a lattice threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSelection {
    /// Threshold in lattice steps.
    pub y_target: i64,
    /// Threshold in price-space units, `delta * y_target`.
    pub y_delta: f64,
    pub requested_prior: f64,
    /// `P(Z_1 >= y1)`, the prior actually used.
    pub realized_prior: f64,
}

impl ExperimentConfig {
    /// Sweep point with `beta = 1 / (2 delta^2)` and an adjusted prior.
    pub fn for_convergence(delta: f64, prior_high: f64) -> Self {
        Self {
            delta,
            beta: convergence_beta(delta),
            prior_high,
            y_target_mode: YTargetMode::AdjustedPrior,
            y_target: None,
            convergence: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_param(self.delta > 0.0 && self.delta.is_finite(), "delta", || {
            format!("must be positive, got {}", self.delta)
        })?;
        ensure_param(self.beta > 0.0 && self.beta.is_finite(), "beta", || {
            format!("must be positive, got {}", self.beta)
        })?;
        ensure_param(self.prior_high > 0.0 && self.prior_high < 1.0, "prior_high", || {
            format!("must lie in (0, 1), got {}", self.prior_high)
        })?;
        if self.convergence {
            ensure_param(self.beta * 2.0 * self.delta * self.delta == 1.0, "beta", || {
                format!(
                    "convergence mode needs beta * 2 * delta^2 = 1, got {}",
                    self.beta * 2.0 * self.delta * self.delta
                )
            })?;
        }
        if self.y_target_mode == YTargetMode::ExactMatch {
            ensure_param(self.y_target.is_some(), "y_target", || {
                "required in exact_match mode".into()
            })?;
        }
        ensure_param(self.paths > 0, "paths", || "must be positive".into())?;
        ensure_param(
            self.grid.probe_times.iter().all(|t| (0.0..1.0).contains(t)),
            "probe_times",
            || "must lie in [0, 1)".into(),
        )?;
        ensure_param(self.grid.time_steps > 0, "time_steps", || "must be positive".into())?;
        let t = &self.tolerances;
        ensure_param(t.quadrature > 0.0, "quadrature", || "must be positive".into())?;
        ensure_param(t.significance > 0.0 && t.significance < 1.0, "significance", || {
            "must lie in (0, 1)".into()
        })?;
        let l = &self.limit;
        ensure_param(
            !l.delta_list.is_empty() && l.delta_list.iter().all(|d| *d > 0.0),
            "delta_list",
            || "must be a non-empty list of positive sizes".into(),
        )?;
        ensure_param(l.prior_high > 0.0 && l.prior_high < 1.0, "limit.prior_high", || {
            "must lie in (0, 1)".into()
        })?;
        ensure_param(l.kb_step > 0.0 && l.kb_step <= 1e-3, "kb_step", || {
            "must lie in (0, 1e-3]".into()
        })?;
        ensure_param(
            l.marginal_times.iter().chain(&l.grid_t).all(|t| (0.0..1.0).contains(t)),
            "limit times",
            || "must lie in [0, 1)".into(),
        )?;
        Ok(())
    }

    /// Threshold and realized prior implied by the mode.
    pub fn target_selection(&self) -> Result<TargetSelection> {
        self.validate()?;
        let law = SkellamParams::new(self.beta)?;
        let y_target = match self.y_target_mode {
            YTargetMode::ExactMatch => self.y_target.expect("validated"),
            YTargetMode::AdjustedPrior => skellam::quantile(1.0 - self.prior_high, law)?,
        };
        Ok(TargetSelection {
            y_target,
            y_delta: y_target as f64 * self.delta,
            requested_prior: self.prior_high,
            realized_prior: skellam::survival(y_target, law),
        })
    }

    /// Law of the bridge for this experiment; its prior is always `h(0, 0)`.
    pub fn law_params(&self) -> Result<BridgeLawParams> {
        let sel = self.target_selection()?;
        BridgeLawParams::exact_match(self.beta, sel.y_target)
    }

    /// Default lattice half-width: `10 + 6 sqrt(beta)` steps.
    pub fn window(&self) -> i64 {
        self.grid
            .window
            .unwrap_or_else(|| (10.0 + 6.0 * self.beta.sqrt()).ceil() as i64)
    }
}

/// `beta = 1 / (2 delta^2)`.
pub fn convergence_beta(delta: f64) -> f64 {
    1.0 / (2.0 * delta * delta)
}
