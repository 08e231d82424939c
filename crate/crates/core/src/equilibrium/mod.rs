//! Value functions of the two insider types, the pricing rule they face,
//! residual checks of their dynamic-programming systems, the choice of the
//! lattice threshold, and profit accounting along simulated paths.
//!
//! Lattice coordinates are integers `k` standing for `y = k delta`; the
//! threshold `z` is also an integer. With `m = z - y` and `M = beta (1 - t)`
//!
//! ```text
//! H(y, t) = delta [ (m - 1)^+ + int_0^M pmf(m - 1; mu) dmu ]
//! L(y, t) = delta [ (-m)^+    + int_0^M pmf(m; mu) dmu ]
//! ```
//!
//! since `d/dt` of the survival difference is a single Skellam mass.

mod profit;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, TargetSelection};
use crate::error::{Error, Result};
use crate::law::{ln_pricing_p_beta, LatticeState};
use crate::quad::integrate;
use crate::skellam::{self, SkellamParams};

pub use profit::{optimality_mc, realized_profit, variant_path, OptimalityReport, StrategyVariant, VariantResult};

/// `p^z(y, t)` with order size `delta`; lattice arguments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricingRule {
    pub beta: f64,
    pub z: i64,
    pub delta: f64,
}

impl PricingRule {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        let sel = config.target_selection()?;
        Ok(Self {
            beta: config.beta,
            z: sel.y_target,
            delta: config.delta,
        })
    }

    pub fn price(&self, y: i64, t: f64) -> f64 {
        ln_pricing_p_beta(self.z, LatticeState::new(y, t), self.beta).exp()
    }

    /// `a(y, t) = p(y + delta, t)`.
    pub fn ask(&self, y: i64, t: f64) -> f64 {
        self.price(y + 1, t)
    }

    /// `b(y, t) = p(y - delta, t)`.
    pub fn bid(&self, y: i64, t: f64) -> f64 {
        self.price(y - 1, t)
    }
}

/// `H(y, 1) = delta (z - 1 - y)^+`.
pub fn terminal_h(y: i64, z: i64, delta: f64) -> f64 {
    delta * (z - 1 - y).max(0) as f64
}

/// `L(y, 1) = delta (y - z)^+`.
pub fn terminal_l(y: i64, z: i64, delta: f64) -> f64 {
    delta * (y - z).max(0) as f64
}

/// `int_0^upper pmf(k; mu) dmu`.
fn pmf_time_integral(k: i64, upper: f64, tol: f64) -> Result<f64> {
    if upper <= 0.0 {
        return Ok(0.0);
    }
    integrate(
        |mu| skellam::pmf(k, SkellamParams::new(mu).expect("nonnegative")),
        0.0,
        upper,
        tol,
    )
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("time must lie in [0, 1], got {t}")));
    }
    Ok(())
}

/// Value of the high type, `H(y, t)`.
pub fn value_h(y: i64, t: f64, rule: &PricingRule, tol: f64) -> Result<f64> {
    check_time(t)?;
    let m = rule.z - y;
    let tail = pmf_time_integral(m - 1, rule.beta * (1.0 - t), tol / rule.delta)?;
    Ok(terminal_h(y, rule.z, rule.delta) + rule.delta * tail)
}

/// Value of the low type, `L(y, t)`.
pub fn value_l(y: i64, t: f64, rule: &PricingRule, tol: f64) -> Result<f64> {
    check_time(t)?;
    let m = rule.z - y;
    let tail = pmf_time_integral(m, rule.beta * (1.0 - t), tol / rule.delta)?;
    Ok(terminal_l(y, rule.z, rule.delta) + rule.delta * tail)
}

/// Threshold and realized prior of the experiment.
pub fn select_y_delta(config: &ExperimentConfig) -> Result<TargetSelection> {
    config.target_selection()
}

/// Tabulated values and quotes on `[y_min, y_max] x times`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSurface {
    pub rule: PricingRule,
    pub y_min: i64,
    pub y_max: i64,
    pub times: Vec<f64>,
    /// `[time][y - y_min]`
    pub h: Vec<Vec<f64>>,
    pub l: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl ValueSurface {
    pub fn build(rule: PricingRule, y_min: i64, y_max: i64, times: Vec<f64>, tol: f64) -> Result<Self> {
        if y_max < y_min || times.is_empty() {
            return Err(Error::Domain("empty surface window".into()));
        }
        let mut s = Self {
            rule,
            y_min,
            y_max,
            times: times.clone(),
            h: Vec::new(),
            l: Vec::new(),
            p: Vec::new(),
            a: Vec::new(),
            b: Vec::new(),
        };
        for &t in &times {
            let ys = y_min..=y_max;
            s.h.push(ys.clone().map(|y| value_h(y, t, &rule, tol)).collect::<Result<_>>()?);
            s.l.push(ys.clone().map(|y| value_l(y, t, &rule, tol)).collect::<Result<_>>()?);
            s.p.push(ys.clone().map(|y| rule.price(y, t)).collect());
            s.a.push(ys.clone().map(|y| rule.ask(y, t)).collect());
            s.b.push(ys.map(|y| rule.bid(y, t)).collect());
        }
        Ok(s)
    }

    /// Window `0 +- config.window()` and `time_steps + 1` equally spaced times.
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        let rule = PricingRule::from_config(config)?;
        let w = config.window();
        let n = config.grid.time_steps;
        let times = (0..=n).map(|i| i as f64 / n as f64).collect();
        Self::build(rule, -w, w, times, config.tolerances.quadrature)
    }

    pub fn len_y(&self) -> usize {
        (self.y_max - self.y_min + 1) as usize
    }

    /// CSV with columns `y,t,H,L,p,a,b`; `y` is in price units.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Serialization(e.to_string());
        writeln!(out, "y,t,H,L,p,a,b").map_err(io)?;
        for (ti, &t) in self.times.iter().enumerate() {
            for j in 0..self.len_y() {
                let y = (self.y_min + j as i64) as f64 * self.rule.delta;
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    y, t, self.h[ti][j], self.l[ti][j], self.p[ti][j], self.a[ti][j], self.b[ti][j]
                )
                .map_err(io)?;
            }
        }
        Ok(())
    }
}

/// Residuals of the value systems over a surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HjbReport {
    /// Finite-difference steps used for the time equation.
    pub dt: Vec<f64>,
    /// Max time-equation residual of `H` and `L` for each `dt`.
    pub time_residual: Vec<f64>,
    /// Successive ratios of `time_residual`; about 4 for a second-order probe.
    pub decay_ratios: Vec<f64>,
    /// Max of `|H(y+d) - H(y) + (1 - p(y+d)) delta|` and the low-type analogue.
    pub equality_residual: f64,
    /// Max over the grid of the wrong-side trade gains; must be `<= 0`.
    pub max_wrong_side_gain: f64,
    /// Max of the wrong-side gains of the high type at `t = 0.5`, `|y - z| <= 5`.
    pub max_wrong_side_gain_mid: f64,
    pub min_value: f64,
    pub grid_points: usize,
}

/// Evaluates the time equation, the equality constraints and the wrong-side
/// inequalities on every interior point of the surface.
pub fn hjb_residuals(surface: &ValueSurface, tol: f64) -> Result<HjbReport> {
    let rule = surface.rule;
    let d = rule.delta;
    let beta = rule.beta;
    let dts = vec![0.02, 0.01, 0.005];
    // tighter quadrature so that differencing does not amplify its noise
    let fine = tol.min(1e-13);

    let mut time_residual = Vec::new();
    for &dt in &dts {
        let mut worst: f64 = 0.0;
        for &t in surface.times.iter().filter(|&&t| t - dt > 0.0 && t + dt < 1.0) {
            for y in surface.y_min + 1..surface.y_max {
                for value in [value_h, value_l] {
                    let ft = (value(y, t + dt, &rule, fine)? - value(y, t - dt, &rule, fine)?) / (2.0 * dt);
                    let lap =
                        value(y + 1, t, &rule, fine)? + value(y - 1, t, &rule, fine)? - 2.0 * value(y, t, &rule, fine)?;
                    worst = worst.max((ft + beta * lap).abs());
                }
            }
        }
        time_residual.push(worst);
    }
    let decay_ratios = time_residual.windows(2).map(|w| w[0] / w[1]).collect();

    let mut equality: f64 = 0.0;
    let mut wrong: f64 = f64::NEG_INFINITY;
    let mut min_value = f64::INFINITY;
    let n = surface.len_y();
    for (ti, &t) in surface.times.iter().enumerate() {
        if t >= 1.0 {
            continue;
        }
        let (hs, ls, ps) = (&surface.h[ti], &surface.l[ti], &surface.p[ti]);
        for j in 0..n {
            min_value = min_value.min(hs[j]).min(ls[j]);
        }
        for j in 0..n - 1 {
            // buying one step for the high type, selling one for the low type
            equality = equality.max((hs[j + 1] - hs[j] + (1.0 - ps[j + 1]) * d).abs());
            equality = equality.max((ls[j] - ls[j + 1] + ps[j] * d).abs());
            // selling for the high type, buying for the low type
            wrong = wrong.max(hs[j] - hs[j + 1] - (1.0 - ps[j]) * d);
            wrong = wrong.max(ls[j + 1] - ls[j] - ps[j + 1] * d);
        }
    }
    let mut wrong_mid = f64::NEG_INFINITY;
    for y in rule.z - 5..=rule.z + 5 {
        let gain = value_h(y - 1, 0.5, &rule, tol)? - value_h(y, 0.5, &rule, tol)? - (1.0 - rule.price(y - 1, 0.5)) * d;
        wrong_mid = wrong_mid.max(gain);
    }
    Ok(HjbReport {
        dt: dts,
        time_residual,
        decay_ratios,
        equality_residual: equality,
        max_wrong_side_gain: wrong,
        max_wrong_side_gain_mid: wrong_mid,
        min_value,
        grid_points: n * surface.times.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(beta: f64, z: i64, delta: f64) -> PricingRule {
        PricingRule { beta, z, delta }
    }

    #[test]
    fn terminal_values() {
        assert_eq!(terminal_h(0, 1, 1.0), 0.0);
        assert_eq!(terminal_h(-2, 1, 0.5), 1.0);
        assert_eq!(terminal_l(3, 1, 1.0), 2.0);
        assert_eq!(terminal_l(1, 1, 1.0), 0.0);
    }

    #[test]
    fn value_at_one_is_terminal() {
        let r = rule(20.0, 1, 0.1);
        for y in -5..5 {
            assert_eq!(value_h(y, 1.0, &r, 1e-10).unwrap(), terminal_h(y, 1, 0.1));
            assert_eq!(value_l(y, 1.0, &r, 1e-10).unwrap(), terminal_l(y, 1, 0.1));
        }
    }

    #[test]
    fn difference_identity() {
        let r = rule(20.0, 1, 1.0);
        for y in -10..10 {
            for &t in &[0.0, 0.2, 0.5, 0.8, 0.95] {
                let lhs = value_h(y + 1, t, &r, 1e-10).unwrap() - value_h(y, t, &r, 1e-10).unwrap();
                let rhs = r.delta * (r.price(y + 1, t) - 1.0);
                assert!((lhs - rhs).abs() < 1e-8, "y={y} t={t}");
            }
        }
    }

    #[test]
    fn origin_value_closed_form() {
        // H(0,0) = int_0^beta pmf(0; mu) dmu for z = 1
        let r = rule(20.0, 1, 1.0);
        let v = value_h(0, 0.0, &r, 1e-10).unwrap();
        let mut simpson = 0.0;
        let n = 200_000;
        let hstep = 20.0 / n as f64;
        for i in 0..=n {
            let mu = i as f64 * hstep;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            simpson += w * skellam::pmf(0, SkellamParams::new(mu).unwrap());
        }
        simpson *= hstep / 3.0;
        assert!((v - simpson).abs() < 1e-9, "{v} vs {simpson}");
    }

    #[test]
    fn surface_residuals() {
        let r = rule(20.0, 1, 1.0);
        let s = ValueSurface::build(r, -20, 20, vec![0.0, 0.25, 0.5, 0.75, 1.0], 1e-10).unwrap();
        let rep = hjb_residuals(&s, 1e-10).unwrap();
        assert!(rep.equality_residual <= 1e-8, "{rep:?}");
        assert!(rep.max_wrong_side_gain <= 0.0);
        assert!(rep.max_wrong_side_gain_mid < 0.0);
        assert!(rep.min_value >= 0.0);
        for ratio in &rep.decay_ratios {
            assert!((ratio - 4.0).abs() < 0.5, "{rep:?}");
        }
    }

    #[test]
    fn csv_export_has_all_rows() {
        let r = rule(5.0, 0, 0.5);
        let s = ValueSurface::build(r, -3, 3, vec![0.0, 0.5, 1.0], 1e-10).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 7 * 3);
        assert!(text.starts_with("y,t,H,L,p,a,b"));
    }

    #[test]
    fn quotes_are_ordered() {
        let r = rule(12.5, 2, 0.2);
        for y in -10..10 {
            let t = 0.3;
            assert!(r.bid(y, t) < r.price(y, t) && r.price(y, t) < r.ask(y, t));
        }
    }

    #[test]
    fn y_delta_selection() {
        let c = ExperimentConfig::for_convergence(0.1, 0.3);
        let sel = select_y_delta(&c).unwrap();
        let k = skellam::quantile(0.7, SkellamParams::new(50.0).unwrap()).unwrap();
        assert_eq!(sel.y_target, k);
        assert!((sel.y_delta - 0.1 * k as f64).abs() < 1e-15);
        let mut prev = i64::MIN;
        for prior in [0.9, 0.7, 0.5, 0.3, 0.1] {
            let k = select_y_delta(&ExperimentConfig::for_convergence(0.1, prior))
                .unwrap()
                .y_target;
            assert!(k >= prev);
            prev = k;
        }
    }
}
