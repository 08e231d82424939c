use serde::{Deserialize, Serialize};

use super::clock::{time_to_s, GUARD_TIME};
use super::{BridgePath, BridgeSimulator};
use crate::error::Result;
use crate::law::{enlarged_intensity, BridgeLawParams, LatticeState, Side};
use crate::quad::integrate;
use crate::skellam::{tail_neighborhood, SkellamParams};

/// Rates of the up and down components of `Y` right after time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityPoint {
    pub t: f64,
    pub up: f64,
    pub down: f64,
}

/// Conditional rates at time zero and after every jump of `Y` before the
/// guard. Between jumps `y` is frozen and the rates move with `t` only.
pub fn intensity_trace(path: &BridgePath, law: &BridgeLawParams) -> Result<Vec<IntensityPoint>> {
    let at = |y: i64, t: f64| -> Result<IntensityPoint> {
        let s = LatticeState::new(y, t);
        Ok(IntensityPoint {
            t,
            up: enlarged_intensity(Side::Up, path.member_high, s, law)?,
            down: enlarged_intensity(Side::Down, path.member_high, s, law)?,
        })
    };
    let mut out = vec![at(0, 0.0)?];
    for e in path.events.iter().filter(|e| e.kind.dy() != 0 && e.t < GUARD_TIME) {
        out.push(at(e.y_after, e.t)?);
    }
    Ok(out)
}

/// Integrated up and down rates of `Y` over `[0, GUARD_TIME]`.
pub fn compensators(path: &BridgePath, sim: &BridgeSimulator) -> Result<(f64, f64)> {
    let law = sim.law();
    let beta = law.beta;
    let clock = sim.clock();
    let mut breaks: Vec<(f64, i64)> = vec![(0.0, 0)];
    breaks.extend(
        path.events
            .iter()
            .filter(|e| e.kind.dy() != 0 && e.t < GUARD_TIME)
            .map(|e| (e.t, e.y_after)),
    );
    let (mut up, mut down) = (0.0, 0.0);
    for (i, &(a, y)) in breaks.iter().enumerate() {
        let b = breaks.get(i + 1).map_or(GUARD_TIME, |x| x.0);
        // rates in the type's own frame, where the insider pushes upwards
        let m = if path.member_high {
            law.y_target - y
        } else {
            1 - law.y_target + y
        };
        let frame_up = beta * (b - a) + clock.cumulative(m, b)? - clock.cumulative(m, a)?;
        let cancelled = integrate(
            |s| {
                let mu = beta * (-s).exp();
                let nb = tail_neighborhood(m, SkellamParams::new(mu).expect("positive"));
                mu * (nb.ln_pmf_at - nb.ln_survival).exp()
            },
            time_to_s(a),
            time_to_s(b),
            1e-10,
        )?;
        let frame_down = beta * (b - a) - cancelled;
        if path.member_high {
            up += frame_up;
            down += frame_down;
        } else {
            up += frame_down;
            down += frame_up;
        }
    }
    Ok((up, down))
}
