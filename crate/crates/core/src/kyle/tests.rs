use rand::Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::config::LimitSpec;
use crate::rng::{RngStreams, Stream};
use crate::verify::chi_square_gof;

#[test]
fn y0_inverts_the_prior() {
    for prior in [0.05, 0.3, 0.5, 0.77, 0.99] {
        let k = KyleParams::new(prior).unwrap();
        assert!((norm_cdf(k.y0) - (1.0 - prior)).abs() < 1e-12, "{prior}");
    }
    assert_eq!(KyleParams::new(0.5).unwrap().y0, 0.0);
    assert!(KyleParams::new(1.0).is_err());
}

#[test]
fn p0_basic_shape() {
    let k = KyleParams::new(0.3).unwrap();
    for t in [0.0, 0.4, 0.9, 0.999] {
        assert!((k.p0(k.y0, t) - 0.5).abs() < 1e-15);
    }
    let half = KyleParams::new(0.5).unwrap();
    assert!((half.p0(0.7, 0.0) - norm_cdf(0.7)).abs() < 1e-15);
    let mut last = 0.0;
    for i in -40..=40 {
        let p = k.p0(i as f64 * 0.1, 0.5);
        assert!(p > last);
        last = p;
    }
    assert!(k.p0(k.y0 + 0.01, 1.0 - 1e-12) > 1.0 - 1e-9);
    assert!(k.p0(k.y0 - 0.01, 1.0 - 1e-12) < 1e-9);
}

#[test]
fn p0_matches_monte_carlo() {
    let k = KyleParams::new(0.3).unwrap();
    let (y, t): (f64, f64) = (0.2, 0.4);
    let n = 1_000_000;
    let mut rng = RngStreams::for_seed(12, Stream::Auxiliary);
    let hits = (0..n)
        .filter(|_| y + (1.0 - t).sqrt() * rng.sample::<f64, _>(StandardNormal) >= k.y0)
        .count();
    let p = hits as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((p - k.p0(y, t)).abs() < 3.0 * se, "{p} vs {}", k.p0(y, t));
}

#[test]
fn depth0_is_the_derivative() {
    let k = KyleParams::new(0.4).unwrap();
    assert!((k.depth0(k.y0, 0.5) - 1.0 / (2.0 * std::f64::consts::PI * 0.5).sqrt()).abs() < 1e-15);
    let mut rng = RngStreams::for_seed(4, Stream::Auxiliary);
    let h = 1e-5;
    for _ in 0..20 {
        let y = rng.gen_range(-2.0..2.0);
        let t = rng.gen_range(0.0..0.9);
        let fd = (k.p0(y + h, t) - k.p0(y - h, t)) / (2.0 * h);
        assert!((fd - k.depth0(y, t)).abs() < 1e-8);
    }
}

#[test]
fn depth0_integrates_to_one() {
    let k = KyleParams::new(0.2).unwrap();
    let total = crate::quad::integrate(|y| k.depth0(y, 0.3), -10.0, 10.0, 1e-13).unwrap();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn p0_solves_the_heat_equation() {
    let k = KyleParams::new(0.35).unwrap();
    let (dt, dy) = (1e-6, 1e-3);
    for &(y, t) in &[(0.0, 0.3), (0.5, 0.6), (-1.0, 0.2)] {
        let pt = (k.p0(y, t + dt) - k.p0(y, t - dt)) / (2.0 * dt);
        let pyy = (k.p0(y + dy, t) - 2.0 * k.p0(y, t) + k.p0(y - dy, t)) / (dy * dy);
        assert!((pt + 0.5 * pyy).abs() < 1e-6, "({y},{t})");
    }
}

#[test]
fn inverse_mills_is_continuous_at_the_switch() {
    let a = norm_pdf(-5.0) / norm_cdf(-5.0);
    let b = inverse_mills(-5.0 - 1e-12);
    assert!((a - b).abs() < 1e-10 * a);
    // phi(x)/Phi(x) ~ -x for very negative x
    assert!((inverse_mills(-40.0) / 40.0 - 1.0).abs() < 1e-3);
    assert!(inverse_mills(-1e3).is_finite());
}

#[test]
fn depth_routes_agree() {
    for delta in [0.2, 0.1, 0.05, 0.02] {
        let gm = GmLattice::from_prior(delta, 0.5).unwrap();
        for &t in &[0.0, 0.25, 0.5, 0.75] {
            for i in -10..=10 {
                let y = i as f64 * 0.2;
                let a = gm.depth_ask(y, t);
                let b = gm.depth_ask_bessel(y, t).unwrap();
                assert!((a - b).abs() < 1e-12, "delta={delta} y={y} t={t}: {a} vs {b}");
                let a = gm.depth_bid(y, t);
                let b = gm.depth_bid_bessel(y, t).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn symmetric_placement_gives_equal_depths() {
    // with z = 0, ask depth at k = 0 and bid depth at k = 1 use orders 1 and 1
    let gm = GmLattice::from_prior(0.1, 0.5).unwrap();
    assert_eq!(gm.z, 0);
    let ask = gm.depth_ask(0.0, 0.5);
    let bid = gm.depth_bid(0.1, 0.5);
    assert!((ask - bid).abs() < 1e-13);
}

#[test]
fn depth_error_shrinks_with_delta() {
    let k = KyleParams::new(0.5).unwrap();
    let spec = LimitSpec::default();
    let errs: Vec<f64> = [0.2, 0.1, 0.05, 0.02]
        .iter()
        .map(|&d| grid_errors(d, &k, &spec.grid_y, &spec.grid_t).unwrap().depth_error)
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn drifts_have_the_right_signs() {
    let k = KyleParams::new(0.5).unwrap();
    assert!(k.drift_high(-1.0, 0.5) > 0.0 && k.drift_low(1.0, 0.5) < 0.0);
    assert!(k.drift_high(8.0, 0.5) < 1e-12);
    assert!(k.drift_low(-8.0, 0.5) > -1e-12);
}

#[test]
fn euler_path_records_stops_exactly() {
    let k = KyleParams::new(0.5).unwrap();
    let mut rng = RngStreams::for_seed(1, Stream::Diffusion);
    let path = simulate_kb(KbType::High, &k, 1e-3, &[0.25, 0.3333, 0.5], &mut rng).unwrap();
    for s in [0.25, 0.3333, 0.5] {
        assert!(path.times.contains(&s));
    }
    assert!(path.times.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(*path.times.last().unwrap(), 1.0 - crate::bridge::TERMINAL_GUARD);
    assert!(path.drift_integral.windows(2).all(|w| w[1] >= w[0]));
    let low = simulate_kb(KbType::Low, &k, 1e-3, &[], &mut rng).unwrap();
    assert!(low.drift_integral.windows(2).all(|w| w[1] <= w[0]));
    assert!(simulate_kb(KbType::High, &k, 2e-3, &[], &mut rng).is_err());
}

#[test]
fn sampled_and_full_paths_agree() {
    let k = KyleParams::new(0.3).unwrap();
    let times = [0.25, 0.5, 0.75];
    let full = simulate_kb(
        KbType::Low,
        &k,
        1e-3,
        &times,
        &mut RngStreams::for_seed(2, Stream::Diffusion),
    )
    .unwrap();
    let s = sample_kb(
        KbType::Low,
        &k,
        1e-3,
        &times,
        &mut RngStreams::for_seed(2, Stream::Diffusion),
    )
    .unwrap();
    for (i, &t) in times.iter().enumerate() {
        assert_eq!(s.observed[i], full.value_at(t));
    }
    assert_eq!(s.cumulative_orders, full.cumulative_orders());
    assert_eq!(s.terminal, *full.values.last().unwrap());
}

/// `P(Y0_{1-eps} < y0)` for the high type: Brownian marginal at `1 - eps`
/// times the chance of crossing back above `y0` in the remaining time.
fn exact_below_share(k: &KyleParams, eps: f64) -> f64 {
    let s = (1.0 - eps).sqrt();
    let inner = |y: f64| norm_pdf(y / s) / s * (1.0 - norm_cdf((k.y0 - y) / eps.sqrt()));
    crate::quad::integrate(inner, k.y0 - 40.0 * eps.sqrt(), k.y0, 1e-13).unwrap() / k.prior_high
}

fn share_above(k: &KyleParams, eps: f64, n: u64, seed: u64) -> f64 {
    let streams = RngStreams::new(seed);
    let above = (0..n)
        .filter(|&i| {
            let mut rng = streams.stream(i, Stream::Diffusion);
            sample_kb(KbType::High, k, 1e-3, &[1.0 - eps], &mut rng)
                .unwrap()
                .observed[0]
                >= k.y0
        })
        .count();
    above as f64 / n as f64
}

#[test]
fn high_paths_end_above_threshold() {
    let n = 10_000;
    // against the exact conditioned share
    let k = KyleParams::new(0.4).unwrap();
    let want = 1.0 - exact_below_share(&k, 1e-3);
    let got = share_above(&k, 1e-3, n, 77);
    let se = (want * (1.0 - want) / n as f64).sqrt();
    assert!((got - want).abs() < 3.0 * se, "{got} vs {want}");
    // the share tends to one and clears 0.99 at eps = 1e-3 for this prior
    let k = KyleParams::new(0.7).unwrap();
    let shares: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|&e| share_above(&k, e, n, 78)).collect();
    assert!(shares.windows(2).all(|w| w[1] >= w[0]), "{shares:?}");
    assert!(shares[1] >= 0.99, "{shares:?}");
}

#[test]
fn marginal_cdf_is_a_distribution() {
    let k = KyleParams::new(0.3).unwrap();
    for kind in [KbType::High, KbType::Low] {
        let lo = kb_marginal_cdf(kind, &k, 0.5, -8.0).unwrap();
        let hi = kb_marginal_cdf(kind, &k, 0.5, 8.0).unwrap();
        assert!(lo < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }
    // the two types mix back to the Brownian marginal
    let y = 0.3;
    let mix = 0.3 * kb_marginal_cdf(KbType::High, &k, 0.5, y).unwrap()
        + 0.7 * kb_marginal_cdf(KbType::Low, &k, 0.5, y).unwrap();
    assert!((mix - norm_cdf(y / 0.5f64.sqrt())).abs() < 1e-11);
}

#[test]
fn half_time_marginal_matches_conditioned_density() {
    let k = KyleParams::new(0.4).unwrap();
    let streams = RngStreams::new(5);
    let n = 10_000;
    for (kind, offset) in [(KbType::High, 0), (KbType::Low, n)] {
        let xs: Vec<f64> = (0..n)
            .map(|i| {
                let mut rng = streams.stream(offset + i, Stream::Diffusion);
                sample_kb(kind, &k, 1e-3, &[0.5], &mut rng).unwrap().observed[0]
            })
            .collect();
        let edges: Vec<f64> = (-16..=16).map(|i| i as f64 * 0.2).collect();
        let mut observed = vec![0.0; edges.len() + 1];
        for x in &xs {
            observed[edges.partition_point(|e| e <= x)] += 1.0;
        }
        let cdf: Vec<f64> = edges
            .iter()
            .map(|&e| kb_marginal_cdf(kind, &k, 0.5, e).unwrap())
            .collect();
        let mut expected = Vec::with_capacity(observed.len());
        let mut prev = 0.0;
        for c in cdf.iter().chain(std::iter::once(&1.0)) {
            expected.push((c - prev) * n as f64);
            prev = *c;
        }
        let chi = chi_square_gof(&observed, &expected, 0).unwrap();
        assert!(chi.p_value > 0.01, "{kind:?}: {chi:?}");
    }
}

#[test]
fn report_without_sampling_is_monotone() {
    let spec = LimitSpec::default();
    let rep = convergence_report(&spec, 1, false).unwrap();
    assert_eq!(rep.rows.len(), 3);
    assert!(rep.rows.windows(2).all(|w| w[0].grid.delta > w[1].grid.delta));
    assert!(rep.monotone.depth_decreasing && rep.monotone.price_decreasing);
    assert!(rep.monotone.ks_nonincreasing.is_none());
    assert!((0.7..=1.3).contains(&rep.depth_order), "{}", rep.depth_order);
    let mut csv = Vec::new();
    rep.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 4);
    assert_eq!(rep.plot_series().len(), 3);
}

#[test]
fn small_sweep_produces_ks_columns() {
    let spec = LimitSpec {
        delta_list: vec![0.5, 0.25],
        paths_per_side: 300,
        ..LimitSpec::default()
    };
    let rep = convergence_report(&spec, 3, true).unwrap();
    for r in &rep.rows {
        assert_eq!(r.ks_high.len(), 3);
        assert!(r.ks_buy_orders.unwrap() < 1.0);
    }
    assert!(rep.monotone.ks_nonincreasing.is_some());
    assert_eq!(rep.plot_series().len(), 4);
}
