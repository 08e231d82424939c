use thiserror::Error;

/// Errors raised by the numerical kernels and simulators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature failed on [{a}, {b}]: error estimate {estimate:e} after {subdivisions} subdivisions")]
    QuadratureFailure {
        a: f64,
        b: f64,
        estimate: f64,
        subdivisions: usize,
    },

    #[error("root bracket [{lo}, {hi}] does not contain a sign change")]
    InvalidBracket { lo: f64, hi: f64 },

    /// A conditioning probability fell below the smallest representable
    /// double even in log form (`ln p < -745`).
    #[error("degenerate state at y = {y}, t = {t}: log conditioning probability {log_prob}")]
    DegenerateState { y: i64, t: f64, log_prob: f64 },

    #[error("terminal guard violated at t = {t}: constraint unresolved")]
    GuardViolation { t: f64 },

    #[error("Euler step unstable at t = {t} after {halvings} halvings")]
    StepInstability { t: f64, halvings: u32 },

    #[error("insufficient sample for `{test}`: have {have}, need {need}")]
    InsufficientSample {
        test: &'static str,
        have: usize,
        need: usize,
    },

    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    /// Stable kebab-case code of the variant, used in machine-readable output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidParameter { .. } => "invalid-parameter",
            Error::QuadratureFailure { .. } => "quadrature-failure",
            Error::InvalidBracket { .. } => "invalid-bracket",
            Error::DegenerateState { .. } => "degenerate-state",
            Error::GuardViolation { .. } => "guard-violation",
            Error::StepInstability { .. } => "step-instability",
            Error::InsufficientSample { .. } => "insufficient-sample",
            Error::Serialization(_) => "serialization",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_param(cond: bool, name: &'static str, reason: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: reason() })
    }
}
