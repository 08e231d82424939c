//! The conditioning kernel `h(y, t) = P(Z_1 >= y1 | Z_t = y)`, the pricing
//! family `p^z`, the intensities of the conditioned jump components and the
//! likelihood ratio `l_t`.
//!
//! Everything lives on the unit lattice: `Z` is a difference of two
//! rate-`beta` Poisson processes with unit jumps. Order size only rescales
//! prices and values and is handled by the equilibrium code.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_param, Error, Result};
use crate::skellam::{self, SkellamParams};

/// Smallest log-probability a conditioning event may have before the state
/// is reported as degenerate instead of silently underflowing.
pub const LN_UNDERFLOW: f64 = -745.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeLawParams {
    pub beta: f64,
    /// Threshold `y1`: the high type needs `Y_1 >= y1`.
    pub y_target: i64,
    /// `P(I)`; equals `h(0, 0)` for laws built by [`BridgeLawParams::exact_match`].
    pub prior_high: f64,
}

impl BridgeLawParams {
    pub fn new(beta: f64, y_target: i64, prior_high: f64) -> Result<Self> {
        ensure_param(beta > 0.0 && beta.is_finite(), "beta", || {
            format!("must be positive, got {beta}")
        })?;
        ensure_param(prior_high > 0.0 && prior_high < 1.0, "prior_high", || {
            format!("must lie strictly inside (0, 1), got {prior_high}")
        })?;
        Ok(Self {
            beta,
            y_target,
            prior_high,
        })
    }

    /// Law whose prior is exactly `h(0, 0)`.
    pub fn exact_match(beta: f64, y_target: i64) -> Result<Self> {
        ensure_param(beta > 0.0 && beta.is_finite(), "beta", || {
            format!("must be positive, got {beta}")
        })?;
        let prior = skellam::survival(y_target, SkellamParams::new(beta)?);
        Self::new(beta, y_target, prior)
    }

    /// `h(0, 0)`.
    pub fn h00(&self) -> f64 {
        h(LatticeState::new(0, 0.0), self)
    }
}

/// A point `(y, t)` of the unit lattice times `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeState {
    pub y: i64,
    pub t: f64,
}

impl LatticeState {
    pub fn new(y: i64, t: f64) -> Self {
        Self { y, t }
    }

    pub fn shifted(self, dy: i64) -> Self {
        Self {
            y: self.y + dy,
            t: self.t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Up,
    Down,
}

fn remaining(beta: f64, t: f64) -> SkellamParams {
    SkellamParams::new(beta * (1.0 - t).max(0.0)).expect("beta validated, t <= 1")
}

/// `ln p^z(y, t)` for the threshold `z` (unit lattice) and rate `beta`.
pub fn ln_pricing_p_beta(z: i64, state: LatticeState, beta: f64) -> f64 {
    if state.t >= 1.0 {
        return if state.y >= z { 0.0 } else { f64::NEG_INFINITY };
    }
    skellam::ln_survival(z - state.y, remaining(beta, state.t))
}

/// `ln(1 - p^z(y, t))`.
pub fn ln_one_minus_pricing_p_beta(z: i64, state: LatticeState, beta: f64) -> f64 {
    if state.t >= 1.0 {
        return if state.y >= z { f64::NEG_INFINITY } else { 0.0 };
    }
    // P(K < m) = P(K >= 1 - m)
    skellam::ln_survival(1 - (z - state.y), remaining(beta, state.t))
}

/// `p^z(y, t) = E[1{Z_1 >= z} | Z_t = y]`.
pub fn pricing_p(z_level: i64, state: LatticeState, params: &BridgeLawParams) -> f64 {
    ln_pricing_p_beta(z_level, state, params.beta).exp()
}

/// `h(y, t)`; at `t = 1` the indicator `1{y >= y1}`.
pub fn h(state: LatticeState, params: &BridgeLawParams) -> f64 {
    ln_h(state, params).exp()
}

/// `ln h(y, t)`.
pub fn ln_h(state: LatticeState, params: &BridgeLawParams) -> f64 {
    ln_pricing_p_beta(params.y_target, state, params.beta)
}

/// `ln(1 - h(y, t))`.
pub fn ln_one_minus_h(state: LatticeState, params: &BridgeLawParams) -> f64 {
    ln_one_minus_pricing_p_beta(params.y_target, state, params.beta)
}

/// `ln g(y, t)` with `g = h` for the high type and `g = 1 - h` for the low.
pub fn ln_g(member_high: bool, state: LatticeState, params: &BridgeLawParams) -> f64 {
    if member_high {
        ln_h(state, params)
    } else {
        ln_one_minus_h(state, params)
    }
}

fn check_interior(state: LatticeState) -> Result<()> {
    if !(state.t >= 0.0 && state.t < 1.0) {
        return Err(Error::Domain(format!(
            "interior evaluation needs t in [0, 1), got {}",
            state.t
        )));
    }
    Ok(())
}

fn conditioning_log(member_high: bool, state: LatticeState, params: &BridgeLawParams) -> Result<f64> {
    let ln = ln_g(member_high, state, params);
    if ln.is_nan() || ln < LN_UNDERFLOW {
        return Err(Error::DegenerateState {
            y: state.y,
            t: state.t,
            log_prob: ln,
        });
    }
    Ok(ln)
}

/// Rate of the up (buy) or down (sell) component of `Y` given membership.
/// On `I` it is `beta h(y +- 1, t) / h(y, t)`; off `I` the same with `1 - h`.
pub fn enlarged_intensity(side: Side, member_high: bool, state: LatticeState, params: &BridgeLawParams) -> Result<f64> {
    check_interior(state)?;
    let ln_here = conditioning_log(member_high, state, params)?;
    let dy = match side {
        Side::Up => 1,
        Side::Down => -1,
    };
    let ln_there = ln_g(member_high, state.shifted(dy), params);
    Ok(params.beta * (ln_there - ln_here).exp())
}

/// `l_t`: `h(0,0) / h(Y_t, t)` on `I` and `(1 - h(0,0)) / (1 - h(Y_t, t))` off it.
pub fn likelihood_ratio(state: LatticeState, member_high: bool, params: &BridgeLawParams) -> Result<f64> {
    check_interior(state)?;
    let ln_here = conditioning_log(member_high, state, params)?;
    let origin = LatticeState::new(0, 0.0);
    Ok((ln_g(member_high, origin, params) - ln_here).exp())
}

/// Central-difference residual of `f_t + beta (f(y+1) + f(y-1) - 2 f(y))`.
fn backward_equation_residual(f: impl Fn(LatticeState) -> f64, state: LatticeState, beta: f64, dt: f64) -> Result<f64> {
    if !(dt > 0.0 && state.t - dt > 0.0 && state.t + dt < 1.0) {
        return Err(Error::Domain(format!(
            "residual probe needs 0 < t - dt and t + dt < 1, got t = {}, dt = {dt}",
            state.t
        )));
    }
    let later = f(LatticeState::new(state.y, state.t + dt));
    let earlier = f(LatticeState::new(state.y, state.t - dt));
    let ft = (later - earlier) / (2.0 * dt);
    let lap = f(state.shifted(1)) + f(state.shifted(-1)) - 2.0 * f(state);
    Ok(ft + beta * lap)
}

/// Finite-difference residual of the backward equation satisfied by `h`.
pub fn h_pde_residual(state: LatticeState, params: &BridgeLawParams, dt: f64) -> Result<f64> {
    backward_equation_residual(|s| h(s, params), state, params.beta, dt)
}

/// Same probe for `p^z`.
pub fn pricing_p_pde_residual(z_level: i64, state: LatticeState, params: &BridgeLawParams, dt: f64) -> Result<f64> {
    backward_equation_residual(|s| pricing_p(z_level, s, params), state, params.beta, dt)
}
