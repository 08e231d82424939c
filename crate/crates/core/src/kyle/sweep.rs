use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sample_kb, GmLattice, KbSample, KbType, KyleParams};
use crate::bridge::{BridgePath, BridgeSimulator, EventKind, Membership};
use crate::config::LimitSpec;
use crate::error::{Error, Result};
use crate::law::BridgeLawParams;
use crate::rng::{RngStreams, Stream};
use crate::verify::ks_two_sample;
use crate::verify::stats::ls_slope;

/// Deterministic errors of one order size on the `(y, t)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridErrors {
    pub delta: f64,
    pub beta: f64,
    pub z: i64,
    pub y_delta: f64,
    pub realized_prior: f64,
    /// `|y_delta - y0|`.
    pub quantile_gap: f64,
    /// `max |p^delta - p0|`.
    pub price_error: f64,
    /// `max |(a - p) / delta - depth0|`.
    pub depth_error: f64,
    /// `max |(p - b) / delta - depth0|`.
    pub bid_depth_error: f64,
    /// `max |depth via survival - depth via Bessel|`, both sides.
    pub route_gap: f64,
    pub max_spread: f64,
    /// Largest distance from a grid `y` to its lattice point.
    pub max_rounding_offset: f64,
}

pub fn grid_errors(delta: f64, params: &KyleParams, grid_y: &[f64], grid_t: &[f64]) -> Result<GridErrors> {
    let gm = GmLattice::from_prior(delta, params.prior_high)?;
    let mut e = GridErrors {
        delta,
        beta: gm.beta,
        z: gm.z,
        y_delta: gm.y_delta(),
        realized_prior: gm.realized_prior,
        quantile_gap: (gm.y_delta() - params.y0).abs(),
        price_error: 0.0,
        depth_error: 0.0,
        bid_depth_error: 0.0,
        route_gap: 0.0,
        max_spread: 0.0,
        max_rounding_offset: 0.0,
    };
    for &t in grid_t {
        for &y in grid_y {
            let (k, offset) = gm.nearest(y);
            let y_lattice = k as f64 * delta;
            let d0 = params.depth0(y_lattice, t);
            let ask = gm.depth_ask(y, t);
            let bid = gm.depth_bid(y, t);
            e.price_error = e.price_error.max((gm.price(y, t) - params.p0(y_lattice, t)).abs());
            e.depth_error = e.depth_error.max((ask - d0).abs());
            e.bid_depth_error = e.bid_depth_error.max((bid - d0).abs());
            e.route_gap = e
                .route_gap
                .max((ask - gm.depth_ask_bessel(y, t)?).abs())
                .max((bid - gm.depth_bid_bessel(y, t)?).abs());
            e.max_spread = e.max_spread.max(gm.spread(y, t));
            e.max_rounding_offset = e.max_rounding_offset.max(offset.abs());
        }
    }
    Ok(e)
}

/// Everything measured at one order size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(flatten)]
    pub grid: GridErrors,
    /// KS distance of the scaled high-type bridge marginals, one per marginal time.
    pub ks_high: Vec<f64>,
    pub ks_low: Vec<f64>,
    /// KS distance of `delta X^B_1` against `B0_1` and of `delta X^S_1` against `S0_1`.
    pub ks_buy_orders: Option<f64>,
    pub ks_sell_orders: Option<f64>,
    pub guard_resolutions: u64,
}

impl ConvergenceRow {
    pub fn max_ks(&self) -> Option<f64> {
        self.ks_high.iter().chain(&self.ks_low).copied().reduce(f64::max)
    }
}

/// Whether each error column shrinks along the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneFlags {
    pub price_decreasing: bool,
    pub depth_decreasing: bool,
    pub bid_depth_decreasing: bool,
    pub quantile_gap_nonincreasing: bool,
    pub ks_nonincreasing: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub params: KyleParams,
    pub kb_step: f64,
    pub paths_per_side: usize,
    pub seed: u64,
    pub marginal_times: Vec<f64>,
    /// Rows ordered by decreasing `delta`.
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln error` against `ln delta`.
    pub depth_order: f64,
    pub price_order: f64,
    pub monotone: MonotoneFlags,
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn nonincreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

/// Lattice value scaled to real units and spread uniformly over its cell.
fn jittered<R: Rng>(k: i64, delta: f64, rng: &mut R) -> f64 {
    (k as f64 + rng.gen::<f64>() - 0.5) * delta
}

fn insider_orders(p: &BridgePath) -> i64 {
    let own: [EventKind; 2] = if p.member_high {
        [EventKind::InsiderLoneBuy, EventKind::InsiderCancelSell]
    } else {
        [EventKind::InsiderLoneSell, EventKind::InsiderCancelBuy]
    };
    p.events.iter().filter(|e| own.contains(&e.kind)).count() as i64
}

struct Samples {
    /// `[time][path]`
    marginals: Vec<Vec<f64>>,
    orders: Vec<f64>,
}

fn kb_samples(
    kind: KbType,
    params: &KyleParams,
    spec: &LimitSpec,
    streams: &RngStreams,
    offset: u64,
) -> Result<Samples> {
    let mut s = Samples {
        marginals: vec![Vec::with_capacity(spec.paths_per_side); spec.marginal_times.len()],
        orders: Vec::with_capacity(spec.paths_per_side),
    };
    for i in 0..spec.paths_per_side as u64 {
        let mut rng = streams.stream(offset + i, Stream::Diffusion);
        let KbSample {
            observed,
            cumulative_orders,
            ..
        } = sample_kb(kind, params, spec.kb_step, &spec.marginal_times, &mut rng)?;
        for (m, v) in s.marginals.iter_mut().zip(observed) {
            m.push(v);
        }
        s.orders.push(cumulative_orders);
    }
    Ok(s)
}

fn bridge_samples(
    sim: &BridgeSimulator,
    membership: Membership,
    delta: f64,
    spec: &LimitSpec,
    streams: &RngStreams,
    offset: u64,
    guard: &mut u64,
) -> Result<Samples> {
    let mut s = Samples {
        marginals: vec![Vec::with_capacity(spec.paths_per_side); spec.marginal_times.len()],
        orders: Vec::with_capacity(spec.paths_per_side),
    };
    for i in 0..spec.paths_per_side as u64 {
        let seed = streams.path_seed(offset + i);
        let path = sim.build_path(seed, membership)?;
        *guard += path.guard_resolutions as u64;
        let mut aux = RngStreams::for_seed(seed, Stream::Auxiliary);
        for (m, &t) in s.marginals.iter_mut().zip(&spec.marginal_times) {
            m.push(jittered(path.y_at(t), delta, &mut aux));
        }
        s.orders.push(jittered(insider_orders(&path), delta, &mut aux));
    }
    Ok(s)
}

fn ks_per_time(a: &Samples, b: &Samples) -> Result<Vec<f64>> {
    a.marginals
        .iter()
        .zip(&b.marginals)
        .map(|(x, y)| Ok(ks_two_sample(x, y)?.0))
        .collect()
}

/// Runs the sweep. Without `with_ks` only the deterministic grid errors are
/// computed; with it the bridge marginals of both types are compared with
/// Euler samples of the limit diffusions (the same limit samples for every
/// order size).
pub fn convergence_report(spec: &LimitSpec, seed: u64, with_ks: bool) -> Result<ConvergenceReport> {
    if spec.delta_list.is_empty() {
        return Err(Error::InvalidParameter {
            name: "delta_list",
            reason: "must not be empty".into(),
        });
    }
    let params = KyleParams::new(spec.prior_high)?;
    let mut deltas = spec.delta_list.clone();
    deltas.sort_by(|a, b| b.total_cmp(a));
    let streams = RngStreams::new(seed);
    let n = spec.paths_per_side as u64;
    let limit = if with_ks {
        Some((
            kb_samples(KbType::High, &params, spec, &streams, 0)?,
            kb_samples(KbType::Low, &params, spec, &streams, n)?,
        ))
    } else {
        None
    };
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in &deltas {
        let grid = grid_errors(delta, &params, &spec.grid_y, &spec.grid_t)?;
        let mut row = ConvergenceRow {
            grid,
            ks_high: Vec::new(),
            ks_low: Vec::new(),
            ks_buy_orders: None,
            ks_sell_orders: None,
            guard_resolutions: 0,
        };
        if let Some((kb_high, kb_low)) = &limit {
            let sim = BridgeSimulator::new(BridgeLawParams::exact_match(row.grid.beta, row.grid.z)?);
            let mut guard = 0;
            let high = bridge_samples(&sim, Membership::High, delta, spec, &streams, 0, &mut guard)?;
            let low = bridge_samples(&sim, Membership::Low, delta, spec, &streams, n, &mut guard)?;
            row.ks_high = ks_per_time(&high, kb_high)?;
            row.ks_low = ks_per_time(&low, kb_low)?;
            row.ks_buy_orders = Some(ks_two_sample(&high.orders, &kb_high.orders)?.0);
            row.ks_sell_orders = Some(ks_two_sample(&low.orders, &kb_low.orders)?.0);
            row.guard_resolutions = guard;
        }
        rows.push(row);
    }
    let ln_d: Vec<f64> = rows.iter().map(|r| r.grid.delta.ln()).collect();
    let col = |f: fn(&ConvergenceRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let depth = col(|r| r.grid.depth_error);
    let price = col(|r| r.grid.price_error);
    let (depth_order, price_order) = if rows.len() >= 2 {
        (
            ls_slope(&ln_d, &depth.iter().map(|e| e.ln()).collect::<Vec<_>>()),
            ls_slope(&ln_d, &price.iter().map(|e| e.ln()).collect::<Vec<_>>()),
        )
    } else {
        (f64::NAN, f64::NAN)
    };
    let ks_nonincreasing = with_ks.then(|| {
        (0..spec.marginal_times.len()).all(|i| {
            nonincreasing(&rows.iter().map(|r| r.ks_high[i]).collect::<Vec<_>>())
                && nonincreasing(&rows.iter().map(|r| r.ks_low[i]).collect::<Vec<_>>())
        })
    });
    let monotone = MonotoneFlags {
        price_decreasing: strictly_decreasing(&price),
        depth_decreasing: strictly_decreasing(&depth),
        bid_depth_decreasing: strictly_decreasing(&col(|r| r.grid.bid_depth_error)),
        quantile_gap_nonincreasing: nonincreasing(&col(|r| r.grid.quantile_gap)),
        ks_nonincreasing,
    };
    Ok(ConvergenceReport {
        params,
        kb_step: spec.kb_step,
        paths_per_side: spec.paths_per_side,
        seed,
        marginal_times: spec.marginal_times.clone(),
        rows,
        depth_order,
        price_order,
        monotone,
    })
}

impl ConvergenceReport {
    /// One row per order size.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Serialization(e.to_string());
        let mut header = String::from(
            "delta,beta,y_delta,quantile_gap,price_error,depth_error,bid_depth_error,route_gap,max_spread",
        );
        for t in &self.marginal_times {
            header.push_str(&format!(",ks_high_t{t},ks_low_t{t}"));
        }
        header.push_str(",ks_buy_orders,ks_sell_orders");
        writeln!(out, "{header}").map_err(io)?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for r in &self.rows {
            let g = &r.grid;
            let mut line = format!(
                "{},{},{},{},{},{},{},{},{}",
                g.delta,
                g.beta,
                g.y_delta,
                g.quantile_gap,
                g.price_error,
                g.depth_error,
                g.bid_depth_error,
                g.route_gap,
                g.max_spread
            );
            for i in 0..self.marginal_times.len() {
                line.push_str(&format!(
                    ",{},{}",
                    opt(r.ks_high.get(i).copied()),
                    opt(r.ks_low.get(i).copied())
                ));
            }
            line.push_str(&format!(",{},{}", opt(r.ks_buy_orders), opt(r.ks_sell_orders)));
            writeln!(out, "{line}").map_err(io)?;
        }
        Ok(())
    }

    /// Two-column series `(delta, value)` keyed by a file stem.
    pub fn plot_series(&self) -> Vec<(&'static str, Vec<(f64, f64)>)> {
        let series = |f: &dyn Fn(&ConvergenceRow) -> Option<f64>| -> Vec<(f64, f64)> {
            self.rows
                .iter()
                .filter_map(|r| f(r).map(|v| (r.grid.delta, v)))
                .collect()
        };
        let mut out = vec![
            ("price_convergence", series(&|r| Some(r.grid.price_error))),
            ("depth_convergence", series(&|r| Some(r.grid.depth_error))),
            ("quantile_convergence", series(&|r| Some(r.grid.quantile_gap))),
        ];
        let ks = series(&|r| r.max_ks());
        if !ks.is_empty() {
            out.push(("ks_decay", ks));
        }
        out
    }
}
