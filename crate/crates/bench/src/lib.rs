//! Fixtures shared by the kernel benchmarks.

use gmbridge::equilibrium::PricingRule;
use gmbridge::{BridgeSimulator, ExperimentConfig, Result};

/// Noise intensities spanning the small, moderate and sweep regimes.
pub const BETAS: [f64; 3] = [1.0, 20.0, 200.0];

/// Arguments of the scaled Bessel function, from the series to the asymptotic regime.
pub const BESSEL_ARGS: [f64; 4] = [0.5, 40.0, 400.0, 1.0e5];

/// Exact-match experiment at noise intensity `beta` with threshold 1.
pub fn config(beta: f64) -> ExperimentConfig {
    ExperimentConfig {
        beta,
        ..ExperimentConfig::default()
    }
}

pub fn simulator(beta: f64) -> Result<BridgeSimulator> {
    BridgeSimulator::from_config(&config(beta))
}

pub fn pricing_rule(beta: f64) -> Result<PricingRule> {
    PricingRule::from_config(&config(beta))
}
