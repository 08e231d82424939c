//! One function per subcommand. Each writes its artifacts through
//! [`Outputs`] and returns whether every declared check passed.

use gmbridge::bridge::{compensators, intensity_trace, simulate_paths, write_jsonl, IntensityPoint, GUARD_TIME};
use gmbridge::equilibrium::{hjb_residuals, optimality_mc, PricingRule, ValueSurface};
use gmbridge::kyle::{convergence_report, ConvergenceReport};
use gmbridge::verify::stats::normal_quantile;
use gmbridge::verify::{
    filter_identity_test, independence_poisson_components, law_preservation, likelihood_ratio_pairs, martingale_probe,
    mean_se, pricing_rationality_test, TestReport,
};
use gmbridge::{BridgeLawParams, BridgePath, BridgeSimulator, Membership};
use serde::Serialize;

use crate::config::Settings;
use crate::error::{CliError, InModule};
use crate::manifest::Outputs;

/// Equality constraints of the value functions must hold to this level.
pub const EQUALITY_TOL: f64 = 1e-8;
/// Accepted ratios of successive time-equation residuals when `dt` halves.
pub const DECAY_RANGE: (f64, f64) = (3.5, 4.5);
/// Accepted range of the fitted depth convergence order.
pub const ORDER_RANGE: (f64, f64) = (0.7, 1.3);
/// KS bound on the marginals at order sizes up to `KS_DELTA`.
pub const KS_BOUND: f64 = 0.05;
pub const KS_DELTA: f64 = 0.05;

const BRIDGE: &str = "bridge_simulator";
const VERIFY: &str = "verify_harness";
const EQUILIBRIUM: &str = "equilibrium_engine";
const LIMIT: &str = "kyle_limit";

/// A named pass/fail line of the run summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        pass,
        detail: detail.into(),
    }
}

fn simulator(s: &Settings) -> Result<BridgeSimulator, CliError> {
    BridgeSimulator::from_config(&s.experiment).in_module(BRIDGE)
}

fn paths(s: &Settings, sim: &BridgeSimulator, membership: Membership) -> Result<Vec<BridgePath>, CliError> {
    simulate_paths(sim, s.experiment.seed, s.experiment.paths, membership).in_module(BRIDGE)
}

#[derive(Serialize)]
struct SimulationSummary {
    paths: usize,
    high_paths: usize,
    y_target: i64,
    h00: f64,
    guard_resolutions: u64,
    constraint_violations: usize,
}

pub fn bridge_simulate(s: &Settings, out: &mut Outputs) -> Result<Vec<Check>, CliError> {
    let sim = simulator(s)?;
    let ps = paths(s, &sim, s.membership)?;
    let mut jsonl = Vec::new();
    write_jsonl(&ps, &mut jsonl).in_module(BRIDGE)?;
    out.write("paths.jsonl", &jsonl)?;
    let violations = ps.iter().filter(|p| p.validate(sim.law()).is_err()).count();
    out.write_json(
        "summary.json",
        &SimulationSummary {
            paths: ps.len(),
            high_paths: ps.iter().filter(|p| p.member_high).count(),
            y_target: sim.law().y_target,
            h00: sim.h00(),
            guard_resolutions: ps.iter().map(|p| p.guard_resolutions as u64).sum(),
            constraint_violations: violations,
        },
    )?;
    Ok(vec![check(
        "bridge_constraint",
        violations == 0,
        format!("{violations} of {} paths violate [Y_1 >= y1] = I", ps.len()),
    )])
}

/// Report of a deliberately corrupted input; it passes when the inner check fails.
fn power_pilot(inner: TestReport, label: &str) -> TestReport {
    TestReport {
        name: format!("power_pilot:{label}"),
        pass: !inner.pass,
        ..inner
    }
}

pub fn verify_law(s: &Settings, slow: bool, out: &mut Outputs) -> Result<Vec<Check>, CliError> {
    let cfg = &s.experiment;
    let alpha = cfg.tolerances.significance;
    let min_bin = cfg.tolerances.min_bin_count;
    let times = &cfg.grid.probe_times;
    let sim = simulator(s)?;
    let law = *sim.law();
    let rule = PricingRule::from_config(cfg).in_module(EQUILIBRIUM)?;
    let ps = paths(s, &sim, Membership::Drawn)?;

    let mut reports = law_preservation(&ps, law.beta, &s.law_times, alpha).in_module(VERIFY)?;
    reports.push(independence_poisson_components(&ps, &s.window_list(), alpha).in_module(VERIFY)?);
    reports.push(filter_identity_test(&ps, &law, times, min_bin).in_module(VERIFY)?);
    for &t in times {
        let pairs = likelihood_ratio_pairs(&ps, &law, 0.0, t).in_module(VERIFY)?;
        let mut r = martingale_probe(&pairs, 1, alpha).in_module(VERIFY)?;
        r.name = format!("martingale_probe(t={t})");
        reports.push(r);
    }
    reports.push(pricing_rationality_test(&ps, &rule, times, min_bin).in_module(VERIFY)?);
    if slow {
        let wrong = BridgeLawParams::exact_match(law.beta, law.y_target + 1).in_module(VERIFY)?;
        let r = filter_identity_test(&ps, &wrong, times, min_bin).in_module(VERIFY)?;
        reports.push(power_pilot(r, "filter_identity_wrong_target"));
        let mut off = law_preservation(&ps, law.beta * 1.25, &[1.0], alpha).in_module(VERIFY)?;
        reports.push(power_pilot(off.remove(0), "law_preservation_wrong_beta"));
    }
    for r in &mut reports {
        r.seed = Some(cfg.seed);
    }
    out.write_json("reports.json", &reports)?;
    Ok(reports
        .iter()
        .map(|r| {
            let p = r.p_value.map_or(String::new(), |p| format!(" p={p:.4}"));
            check(
                &r.name,
                r.pass,
                format!("statistic={:.4} threshold={:.4}{p}", r.statistic, r.threshold),
            )
        })
        .collect())
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    seed: u64,
    member_high: bool,
    points: &'a [IntensityPoint],
}

pub fn verify_trace(s: &Settings, out: &mut Outputs) -> Result<Vec<Check>, CliError> {
    let cfg = &s.experiment;
    let sim = simulator(s)?;
    let ps = paths(s, &sim, s.membership)?;
    let mut jsonl = Vec::new();
    for p in ps.iter().take(s.trace_paths) {
        let points = intensity_trace(p, sim.law()).in_module(BRIDGE)?;
        let record = TraceRecord {
            seed: p.seed,
            member_high: p.member_high,
            points: &points,
        };
        serde_json::to_writer(&mut jsonl, &record).map_err(|e| CliError::Serialize(e.to_string()))?;
        jsonl.push(b'\n');
    }
    out.write("traces.jsonl", &jsonl)?;

    // counts minus compensators are centred on [0, GUARD_TIME]
    let (mut up, mut down) = (Vec::new(), Vec::new());
    for p in &ps {
        let (a_up, a_down) = compensators(p, &sim).in_module(BRIDGE)?;
        up.push(p.jump_times(true).filter(|&t| t < GUARD_TIME).count() as f64 - a_up);
        down.push(p.jump_times(false).filter(|&t| t < GUARD_TIME).count() as f64 - a_down);
    }
    let alpha = cfg.tolerances.significance;
    let z_crit = normal_quantile(1.0 - alpha / 4.0);
    let mut reports = Vec::new();
    for (side, xs) in [("up", &up), ("down", &down)] {
        let (mean, se) = mean_se(xs);
        let z = (mean / se).abs();
        reports.push(TestReport {
            name: format!("compensated_count({side})"),
            anchor: "counts minus compensators are martingales".into(),
            statistic: z,
            p_value: None,
            interval: Some((mean - 3.0 * se, mean + 3.0 * se)),
            threshold: z_crit,
            pass: z < z_crit,
            sample_size: xs.len(),
            seed: Some(cfg.seed),
            details: [("mean".to_string(), mean), ("se".to_string(), se)].into(),
        });
    }
    out.write_json("compensators.json", &reports)?;
    Ok(reports
        .iter()
        .map(|r| {
            check(
                &r.name,
                r.pass,
                format!("|z|={:.3} threshold={:.3}", r.statistic, r.threshold),
            )
        })
        .collect())
}

pub fn equilibrium_value(s: &Settings, out: &mut Outputs) -> Result<Vec<Check>, CliError> {
    let cfg = &s.experiment;
    let surface = ValueSurface::from_config(cfg).in_module(EQUILIBRIUM)?;
    let mut csv = Vec::new();
    surface.write_csv(&mut csv).in_module(EQUILIBRIUM)?;
    out.write("surface.csv", &csv)?;
    let report = hjb_residuals(&surface, cfg.tolerances.quadrature).in_module(EQUILIBRIUM)?;
    out.write_json("residuals.json", &report)?;
    let decay_ok = !report.decay_ratios.is_empty()
        && report
            .decay_ratios
            .iter()
            .all(|r| (DECAY_RANGE.0..=DECAY_RANGE.1).contains(r));
    Ok(vec![
        check(
            "equality_constraints",
            report.equality_residual <= EQUALITY_TOL,
            format!("max residual {:.3e} (bound {EQUALITY_TOL:e})", report.equality_residual),
        ),
        check(
            "time_equation_decay",
            decay_ok,
            format!(
                "residuals [{}] ratios {:.3?}",
                report
                    .time_residual
                    .iter()
                    .map(|r| format!("{r:.3e}"))
                    .collect::<Vec<_>>()
                    .join(", "),
                report.decay_ratios
            ),
        ),
        check(
            "wrong_side_trades_lose",
            report.max_wrong_side_gain <= 0.0,
            format!("max gain {:.3e}", report.max_wrong_side_gain),
        ),
        check(
            "values_nonnegative",
            report.min_value >= 0.0,
            format!("min value {:.3e}", report.min_value),
        ),
    ])
}

pub fn equilibrium_optimality(s: &Settings, out: &mut Outputs) -> Result<Vec<Check>, CliError> {
    let cfg = &s.experiment;
    let sim = simulator(s)?;
    let rule = PricingRule::from_config(cfg).in_module(EQUILIBRIUM)?;
    let mut reports = Vec::new();
    for &member_high in &s.types {
        reports.push(
            optimality_mc(
                &sim,
                &rule,
                &s.variants,
                member_high,
                cfg.paths,
                cfg.seed,
                cfg.tolerances.significance,
            )
            .in_module(EQUILIBRIUM)?,
        );
    }
    out.write_json("optimality.json", &reports)?;
    Ok(reports
        .iter()
        .map(|r| {
            let variants: Vec<String> = r
                .variants
                .iter()
                .map(|v| format!("{} {:.4} (p={:.2e})", v.name, v.mean, v.p_value_below))
                .collect();
            check(
                format!("optimality({})", if r.member_high { "high" } else { "low" }),
                r.pass,
                format!(
                    "value {:.4}, equilibrium {:.4} +- {:.4}; {}",
                    r.value,
                    r.equilibrium.mean,
                    r.equilibrium.se,
                    variants.join(", ")
                ),
            )
        })
        .collect())
}

fn write_convergence(report: &ConvergenceReport, out: &mut Outputs) -> Result<(), CliError> {
    out.write_json("convergence.json", report)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv).in_module(LIMIT)?;
    out.write("convergence.csv", &csv)?;
    for (stem, points) in report.plot_series() {
        out.write_series(&format!("{stem}.dat"), &points)?;
    }
    Ok(())
}

fn grid_checks(report: &ConvergenceReport) -> Vec<Check> {
    let m = &report.monotone;
    let order_ok = (ORDER_RANGE.0..=ORDER_RANGE.1).contains(&report.depth_order);
    vec![
        check("depth_error_decreasing", m.depth_decreasing, ""),
        check(
            "depth_order",
            order_ok,
            format!("fitted order {:.3}, accepted {ORDER_RANGE:?}", report.depth_order),
        ),
        check("price_error_decreasing", m.price_decreasing, ""),
        check("quantile_gap_nonincreasing", m.quantile_gap_nonincreasing, ""),
    ]
}

pub fn limit_depth(s: &Settings, out: &mut Outputs) -> Result<Vec<Check>, CliError> {
    let report = convergence_report(&s.experiment.limit, s.experiment.seed, false).in_module(LIMIT)?;
    write_convergence(&report, out)?;
    Ok(grid_checks(&report))
}

pub fn limit_converge(s: &Settings, out: &mut Outputs) -> Result<Vec<Check>, CliError> {
    let report = convergence_report(&s.experiment.limit, s.experiment.seed, true).in_module(LIMIT)?;
    write_convergence(&report, out)?;
    let mut checks = grid_checks(&report);
    checks.push(check(
        "ks_nonincreasing",
        report.monotone.ks_nonincreasing == Some(true),
        "",
    ));
    for row in report.rows.iter().filter(|r| r.grid.delta <= KS_DELTA) {
        let ks = row.max_ks().unwrap_or(f64::INFINITY);
        checks.push(check(
            format!("ks_bound(delta={})", row.grid.delta),
            ks < KS_BOUND,
            format!("max KS {ks:.4}, bound {KS_BOUND}"),
        ));
    }
    Ok(checks)
}
