use super::*;
use crate::law::{enlarged_intensity, h, LatticeState, Side};

fn sim(beta: f64, y1: i64) -> BridgeSimulator {
    BridgeSimulator::new(BridgeLawParams::exact_match(beta, y1).unwrap())
}

#[test]
fn same_seed_same_ledger() {
    let s = sim(20.0, 1);
    let a = s.build_path(42, Membership::Drawn).unwrap();
    let b = s.build_path(42, Membership::Drawn).unwrap();
    assert_eq!(a, b);
    let c = s.build_path(43, Membership::Drawn).unwrap();
    assert_ne!(a.events, c.events);
}

#[test]
fn constraint_holds_on_both_types() {
    let s = sim(20.0, 1);
    for seed in 0..400 {
        for membership in [Membership::High, Membership::Low] {
            let p = s.build_path(seed, membership).unwrap();
            p.validate(s.law()).unwrap();
        }
    }
}

#[test]
fn ledger_kinds_match_type() {
    let s = sim(8.0, -2);
    let p = s.build_path(5, Membership::Low).unwrap();
    assert!(!p.member_high);
    assert!(p.terminal_y < -2);
    assert!(p
        .events
        .iter()
        .all(|e| !matches!(e.kind, EventKind::InsiderLoneBuy | EventKind::InsiderCancelSell)));
}

#[test]
fn unreachable_threshold_gives_quiet_insider() {
    let law = BridgeLawParams::new(1.0, -1000, 0.5).unwrap();
    let s = BridgeSimulator::new(law);
    let n = 2000;
    let marks: usize = (0..n)
        .map(|i| s.build_path(i, Membership::High).unwrap().insider_mark_count())
        .sum();
    assert!((marks as f64 / n as f64) < 0.05);
}

#[test]
fn reflected_low_type_matches_complement_intensities() {
    let law = BridgeLawParams::exact_match(6.0, 2).unwrap();
    let s = BridgeSimulator::new(law);
    for &(y, t) in &[(-3, 0.1), (1, 0.5), (2, 0.7), (5, 0.95)] {
        let state = LatticeState::new(y, t);
        let m_reflected = 1 - law.y_target + y;
        // extra sell rate of the low type
        let direct = enlarged_intensity(Side::Down, false, state, &law).unwrap() - law.beta;
        let reflected = s.clock().lone_rate(m_reflected, t);
        assert!((direct - reflected).abs() <= 1e-9 * direct.max(1e-300), "y={y} t={t}");
        // pass probability of a noise buy
        let keep = (1.0 - h(state.shifted(1), &law)) / (1.0 - h(state, &law));
        assert!((keep - s.clock().keep_probability(m_reflected, t)).abs() < 1e-12);
    }
}

#[test]
fn jsonl_round_trip_is_bit_exact() {
    let s = sim(20.0, 1);
    let paths: Vec<_> = (0..20).map(|i| s.build_path(i, Membership::Drawn).unwrap()).collect();
    let mut buf = Vec::new();
    write_jsonl(&paths, &mut buf).unwrap();
    let back = read_jsonl(&buf[..]).unwrap();
    assert_eq!(paths.len(), back.len());
    for (a, b) in paths.iter().zip(&back) {
        assert_eq!(a, b);
        for (x, y) in a.events.iter().zip(&b.events) {
            assert_eq!(x.t.to_bits(), y.t.to_bits());
        }
    }
    let line = std::str::from_utf8(&buf).unwrap().lines().next().unwrap();
    let v: serde_json::Value = serde_json::from_str(line).unwrap();
    for key in ["seed", "member_high", "terminal_y", "events"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn trace_has_beta_rates_where_h_is_flat() {
    let law = BridgeLawParams::new(2.0, -60, 0.5).unwrap();
    let s = BridgeSimulator::new(law);
    let p = s.build_path(1, Membership::High).unwrap();
    for point in intensity_trace(&p, &law).unwrap() {
        assert!((point.up - 2.0).abs() < 1e-9 && (point.down - 2.0).abs() < 1e-9);
    }
}

#[test]
fn trace_uses_complement_ratios_off_i() {
    let s = sim(10.0, 1);
    let p = (0..50)
        .map(|i| s.build_path(i, Membership::Low).unwrap())
        .find(|p| p.events.len() > 3)
        .unwrap();
    let trace = intensity_trace(&p, s.law()).unwrap();
    for point in trace.iter().take(3) {
        let y = p.y_at(point.t);
        let st = LatticeState::new(y, point.t);
        let want = 10.0 * (1.0 - h(st.shifted(-1), s.law())) / (1.0 - h(st, s.law()));
        assert!((point.down - want).abs() < 1e-9 * want);
    }
}

#[test]
fn y_at_is_right_continuous() {
    let s = sim(20.0, 1);
    let p = s.build_path(3, Membership::High).unwrap();
    let first = p.events.iter().find(|e| e.kind.dy() != 0).unwrap();
    assert_eq!(p.y_at(first.t), first.y_after);
    assert_eq!(p.y_at(first.t - 1e-12), first.y_after - first.kind.dy());
    assert_eq!(p.y_at(1.0), p.terminal_y);
}
