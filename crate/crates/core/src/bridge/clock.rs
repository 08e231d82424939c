//! The lone-order clock of the conditioned high type.
//!
//! With `m = y1 - y` steps still missing, the insider adds buys at rate
//! `lambda_m(u) = beta (h(y+1,u) - h(y,u)) / h(y,u) = beta pmf(m-1) / S(m)`
//! evaluated at `mu = beta (1 - u)`. The next lone order after `t0` is the
//! first `t` with `int_{t0}^t lambda_m = -ln(1 - eta)`.
//!
//! For `m >= 1` the rate blows up like `m / (1 - u)`, so the integral is
//! taken in `s = -ln(1 - u)`, where the integrand `lambda_m(u) (1 - u)`
//! stays bounded and tends to `m`. Cumulative integrals on a uniform
//! `s`-grid up to the terminal guard are tabulated once per `m`; a query
//! interpolates (cubic Hermite) and then polishes the root with Newton steps
//! whose integrals use a 5-point Gauss rule on the sub-panel.

use std::ops::RangeInclusive;
use std::sync::OnceLock;

use crate::error::Result;
use crate::quad::{gauss_legendre5, integrate, newton_increasing};
use crate::skellam::{tail_neighborhood, SkellamParams};

/// Width of the terminal guard: nothing is scheduled at `t >= 1 - TERMINAL_GUARD`.
pub const TERMINAL_GUARD: f64 = 1e-9;

/// `1 - TERMINAL_GUARD`.
pub const GUARD_TIME: f64 = 1.0 - TERMINAL_GUARD;

const PANELS: usize = 2048;

/// Per-panel tolerance; the total stays below `1e-10`.
const PANEL_TOL: f64 = 4e-14;

/// Newton tolerance in `s`.
const ROOT_TOL: f64 = 1e-13;

#[derive(Debug)]
struct ClockTable {
    /// cumulative integral at the panel nodes, `cum[0] = 0`
    cum: Vec<f64>,
    /// integrand at the panel nodes
    rate: Vec<f64>,
}

/// Immutable clock kernel for one `beta`; tables are filled on first use.
#[derive(Debug)]
pub struct ClockKernel {
    beta: f64,
    m_lo: i64,
    tables: Vec<OnceLock<ClockTable>>,
    s_max: f64,
    width: f64,
}

/// `s = -ln(1 - t)`.
pub fn time_to_s(t: f64) -> f64 {
    -(-t).ln_1p()
}

/// `t = 1 - e^{-s}`.
pub fn s_to_time(s: f64) -> f64 {
    -(-s).exp_m1()
}

impl ClockKernel {
    /// Kernel with tabulated `m` in `m_range`; other `m` fall back to direct
    /// adaptive quadrature.
    pub fn new(beta: f64, m_range: RangeInclusive<i64>) -> Self {
        let (lo, hi) = (*m_range.start(), *m_range.end());
        let count = if hi >= lo { (hi - lo + 1) as usize } else { 0 };
        let s_max = time_to_s(GUARD_TIME);
        Self {
            beta,
            m_lo: lo,
            tables: (0..count).map(|_| OnceLock::new()).collect(),
            s_max,
            width: s_max / PANELS as f64,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Lone-order rate in time units, `lambda_m(t)`.
    pub fn lone_rate(&self, m: i64, t: f64) -> f64 {
        self.rate_s(m, time_to_s(t)) / (1.0 - t)
    }

    /// Integrand in `s`: `lambda_m(u(s)) e^{-s}`.
    pub fn rate_s(&self, m: i64, s: f64) -> f64 {
        let decay = (-s).exp();
        let mu = self.beta * decay;
        let nb = tail_neighborhood(m, SkellamParams::new(mu).expect("positive"));
        mu * (nb.ln_pmf_below - nb.ln_survival).exp()
    }

    /// Probability that a down jump at `t` passes when `m` steps are missing:
    /// `h(y-1, t) / h(y, t) = 1 - pmf(m) / S(m)`.
    pub fn keep_probability(&self, m: i64, t: f64) -> f64 {
        let mu = self.beta * (1.0 - t);
        let nb = tail_neighborhood(m, SkellamParams::new(mu).expect("positive"));
        -(nb.ln_pmf_at - nb.ln_survival).exp_m1()
    }

    fn table(&self, m: i64) -> Option<&ClockTable> {
        let idx = m.checked_sub(self.m_lo)?;
        if idx < 0 {
            return None;
        }
        let cell = self.tables.get(idx as usize)?;
        Some(cell.get_or_init(|| self.build_table(m)))
    }

    fn build_table(&self, m: i64) -> ClockTable {
        let mut cum = Vec::with_capacity(PANELS + 1);
        let mut rate = Vec::with_capacity(PANELS + 1);
        cum.push(0.0);
        rate.push(self.rate_s(m, 0.0));
        let mut acc = 0.0;
        for k in 0..PANELS {
            let a = k as f64 * self.width;
            let b = if k + 1 == PANELS { self.s_max } else { a + self.width };
            acc += integrate(|s| self.rate_s(m, s), a, b, PANEL_TOL).expect("clock integrand is smooth and bounded");
            cum.push(acc);
            rate.push(self.rate_s(m, b));
        }
        ClockTable { cum, rate }
    }

    fn node(&self, k: usize) -> f64 {
        if k >= PANELS {
            self.s_max
        } else {
            k as f64 * self.width
        }
    }

    /// `int_0^t lambda_m(u) du`, for `t <= GUARD_TIME`.
    pub fn cumulative(&self, m: i64, t: f64) -> Result<f64> {
        let s = time_to_s(t).min(self.s_max);
        match self.table(m) {
            Some(table) => {
                let k = ((s / self.width) as usize).min(PANELS - 1);
                let mut f = |x: f64| self.rate_s(m, x);
                Ok(table.cum[k] + gauss_legendre5(&mut f, self.node(k), s))
            }
            None => integrate(|x| self.rate_s(m, x), 0.0, s, 1e-10),
        }
    }

    /// Time of the next lone order after `t0` for the exponential target
    /// `e = -ln(1 - eta)`, or `None` when it would fall past the guard.
    pub fn invert(&self, m: i64, t0: f64, e: f64) -> Result<Option<f64>> {
        let s0 = time_to_s(t0);
        if s0 >= self.s_max {
            return Ok(None);
        }
        let Some(table) = self.table(m) else {
            return self.invert_direct(m, t0, e);
        };
        let mut f = |x: f64| self.rate_s(m, x);
        let k0 = ((s0 / self.width) as usize).min(PANELS - 1);
        let target = table.cum[k0] + gauss_legendre5(&mut f, self.node(k0), s0) + e;
        if target >= table.cum[PANELS] {
            return Ok(None);
        }
        let j = table.cum.partition_point(|&c| c <= target);
        let k = j.saturating_sub(1).max(k0).min(PANELS - 1);
        let (a, b) = (self.node(k), self.node(k + 1));
        let lo = if k == k0 { s0 } else { a };
        let guess = hermite_inverse(
            a,
            b,
            table.cum[k],
            table.cum[k + 1],
            table.rate[k],
            table.rate[k + 1],
            target,
        )
        .clamp(lo, b);
        let base = table.cum[k];
        let s = newton_increasing(
            |x| (base + gauss_legendre5(&mut f, a, x) - target, f(x)),
            lo,
            b,
            guess,
            ROOT_TOL,
        )?;
        Ok(Some(s_to_time(s)))
    }

    /// Same as [`invert`](Self::invert) without tables: marches panel by
    /// panel with adaptive quadrature and then refines inside the panel.
    pub fn invert_direct(&self, m: i64, t0: f64, e: f64) -> Result<Option<f64>> {
        let mut a = time_to_s(t0);
        if a >= self.s_max {
            return Ok(None);
        }
        let mut acc = 0.0;
        let mut f = |x: f64| self.rate_s(m, x);
        loop {
            let b = (a + self.width).min(self.s_max);
            let piece = integrate(&mut f, a, b, PANEL_TOL)?;
            if acc + piece > e {
                let need = e - acc;
                let s = newton_increasing(
                    |x| {
                        (
                            integrate(&mut |u| self.rate_s(m, u), a, x, PANEL_TOL).unwrap_or(f64::NAN) - need,
                            self.rate_s(m, x),
                        )
                    },
                    a,
                    b,
                    a + (b - a) * (need / piece),
                    ROOT_TOL,
                )?;
                return Ok(Some(s_to_time(s)));
            }
            acc += piece;
            if b >= self.s_max {
                return Ok(None);
            }
            a = b;
        }
    }
}

/// Solves the cubic Hermite interpolant of an increasing cumulative function
/// for `target` on `[a, b]`.
fn hermite_inverse(a: f64, b: f64, c0: f64, c1: f64, r0: f64, r1: f64, target: f64) -> f64 {
    let h = b - a;
    if c1 <= c0 {
        return a;
    }
    let eval = |u: f64| {
        let u2 = u * u;
        let u3 = u2 * u;
        let v = (2.0 * u3 - 3.0 * u2 + 1.0) * c0
            + (u3 - 2.0 * u2 + u) * h * r0
            + (-2.0 * u3 + 3.0 * u2) * c1
            + (u3 - u2) * h * r1;
        let dv = (6.0 * u2 - 6.0 * u) * c0
            + (3.0 * u2 - 4.0 * u + 1.0) * h * r0
            + (-6.0 * u2 + 6.0 * u) * c1
            + (3.0 * u2 - 2.0 * u) * h * r1;
        (v, dv)
    };
    let mut u = ((target - c0) / (c1 - c0)).clamp(0.0, 1.0);
    for _ in 0..4 {
        let (v, dv) = eval(u);
        if dv <= 0.0 {
            break;
        }
        u = (u - (v - target) / dv).clamp(0.0, 1.0);
    }
    a + u * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::{enlarged_intensity, BridgeLawParams, LatticeState, Side};

    #[test]
    fn rate_matches_intensity_difference() {
        let law = BridgeLawParams::exact_match(20.0, 1).unwrap();
        let k = ClockKernel::new(20.0, -5..=5);
        for y in -4..4 {
            for &t in &[0.0, 0.3, 0.8, 0.99] {
                let total = enlarged_intensity(Side::Up, true, LatticeState::new(y, t), &law).unwrap();
                let lone = k.lone_rate(1 - y, t);
                assert!((total - 20.0 - lone).abs() < 1e-9 * total, "y={y} t={t}");
            }
        }
    }

    #[test]
    fn integrand_tends_to_missing_steps() {
        let k = ClockKernel::new(20.0, 0..=0);
        for m in 1..5 {
            let g = k.rate_s(m, 20.0);
            assert!((g - m as f64).abs() < 1e-5, "m={m}: {g}");
        }
        assert!(k.rate_s(-3, 20.0) < 1e-20);
    }

    #[test]
    fn table_and_direct_inversion_agree() {
        let k = ClockKernel::new(20.0, -10..=10);
        for &m in &[-2, 0, 1, 3] {
            for &t0 in &[0.0, 0.37, 0.9] {
                for &e in &[1e-3, 0.4, 2.0, 7.0] {
                    let a = k.invert(m, t0, e).unwrap();
                    let b = k.invert_direct(m, t0, e).unwrap();
                    match (a, b) {
                        (Some(x), Some(y)) => assert!(
                            (x - y).abs() <= 1e-11 * (1.0 - x).max(1e-9),
                            "m={m} t0={t0} e={e}: {x} {y}"
                        ),
                        (None, None) => {}
                        other => panic!("m={m} t0={t0} e={e}: {other:?}"),
                    }
                }
            }
        }
    }

    #[test]
    fn inverted_time_reproduces_target() {
        let k = ClockKernel::new(12.5, -8..=8);
        let m = 2;
        let t0 = 0.2;
        let e = 1.3;
        let t = k.invert(m, t0, e).unwrap().unwrap();
        let got = k.cumulative(m, t).unwrap() - k.cumulative(m, t0).unwrap();
        assert!((got - e).abs() < 1e-10, "{got}");
        // direct time-domain check with the original integrand
        let direct = integrate(|u| k.lone_rate(m, u), t0, t, 1e-11).unwrap();
        assert!((direct - e).abs() < 1e-8, "{direct}");
    }

    #[test]
    fn zero_target_returns_start() {
        let k = ClockKernel::new(5.0, -3..=3);
        let t = k.invert(1, 0.25, 0.0).unwrap().unwrap();
        assert!((t - 0.25).abs() < 1e-12);
    }

    #[test]
    fn far_above_target_rarely_fires() {
        let k = ClockKernel::new(20.0, -30..=30);
        // y = y1 + 20
        let total = k.cumulative(-20, GUARD_TIME).unwrap();
        assert!(total < 1e-2, "{total}");
        assert_eq!(k.invert(-20, 0.0, 0.01).unwrap(), None);
    }

    #[test]
    fn missing_steps_always_fire_before_guard_eventually() {
        let k = ClockKernel::new(20.0, -5..=5);
        // for m >= 1 the cumulative grows like m ln(1/(1-t)); huge targets
        // still resolve before the guard unless they exceed m * 20.7
        assert!(k.invert(1, 0.0, 15.0).unwrap().is_some());
        assert!(k.invert(1, 0.0, 40.0).unwrap().is_none());
    }

    #[test]
    fn keep_probability_limits() {
        let k = ClockKernel::new(20.0, 0..=0);
        // at y = y1 near the end, sells are almost surely cancelled
        assert!(k.keep_probability(0, 1.0 - 1e-6) < 1e-4);
        // far above, they pass
        assert!(k.keep_probability(-30, 0.5) > 1.0 - 1e-9);
    }
}
