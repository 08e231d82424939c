//! Exact event-driven construction of the point-process bridge
//! `Y = Z + X^B 1_I - X^S 1_{I^c}`.
//!
//! The high type runs on the original lattice: between jumps of `Y` it
//! schedules a lone buy from the clock in [`clock`], lets noise buys pass,
//! and keeps each noise sell with probability `h(y-1, t) / h(y, t)`,
//! cancelling it otherwise. The low type is the same algorithm on the
//! reflected lattice `y -> -y` with threshold `1 - y1`, where noise buys and
//! sells swap roles.
//!
//! All auxiliary randomness (the membership draw, the clock uniforms and the
//! cancellation uniforms) comes from named streams fixed at time zero.

pub mod clock;
mod io;
mod trace;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::law::BridgeLawParams;
use crate::rng::{RngStreams, Stream};
use crate::skellam::{sample_noise_jumps, JumpTimes};

pub use clock::{ClockKernel, GUARD_TIME, TERMINAL_GUARD};
pub use io::{read_jsonl, write_jsonl};
pub use trace::{compensators, intensity_trace, IntensityPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    NoiseBuy,
    NoiseSell,
    InsiderLoneBuy,
    InsiderCancelSell,
    InsiderLoneSell,
    InsiderCancelBuy,
}

impl EventKind {
    /// Change of `Y` caused by the event.
    pub fn dy(self) -> i64 {
        match self {
            EventKind::NoiseBuy | EventKind::InsiderLoneBuy => 1,
            EventKind::NoiseSell | EventKind::InsiderLoneSell => -1,
            EventKind::InsiderCancelSell | EventKind::InsiderCancelBuy => 0,
        }
    }

    pub fn is_insider(self) -> bool {
        !matches!(self, EventKind::NoiseBuy | EventKind::NoiseSell)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventMark {
    pub t: f64,
    pub kind: EventKind,
    pub y_after: i64,
}

/// Event ledger of one path on the unit lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgePath {
    pub seed: u64,
    pub member_high: bool,
    pub terminal_y: i64,
    pub events: Vec<EventMark>,
    /// Lone orders forced by the terminal guard.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub guard_resolutions: u32,
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

impl BridgePath {
    /// `Y_t`, right-continuous.
    pub fn y_at(&self, t: f64) -> i64 {
        let n = self.events.partition_point(|e| e.t <= t);
        if n == 0 {
            0
        } else {
            self.events[n - 1].y_after
        }
    }

    pub fn insider_mark_count(&self) -> usize {
        self.events.iter().filter(|e| e.kind.is_insider()).count()
    }

    /// Times at which `Y` jumps up (`up = true`) or down.
    pub fn jump_times(&self, up: bool) -> impl Iterator<Item = f64> + '_ {
        let sign = if up { 1 } else { -1 };
        self.events.iter().filter(move |e| e.kind.dy() == sign).map(|e| e.t)
    }

    /// Checks the ledger invariants against the law.
    pub fn validate(&self, law: &BridgeLawParams) -> Result<()> {
        let mut y = 0;
        let mut last = f64::NEG_INFINITY;
        for e in &self.events {
            if !(e.t >= last && e.t < 1.0) {
                return Err(Error::Domain(format!("event times out of order at t = {}", e.t)));
            }
            last = e.t;
            y += e.kind.dy();
            if y != e.y_after {
                return Err(Error::Domain(format!("ledger mismatch at t = {}", e.t)));
            }
            let wrong_side = if self.member_high {
                matches!(e.kind, EventKind::InsiderLoneSell | EventKind::InsiderCancelBuy)
            } else {
                matches!(e.kind, EventKind::InsiderLoneBuy | EventKind::InsiderCancelSell)
            };
            if wrong_side {
                return Err(Error::Domain(format!("{:?} on the wrong type at t = {}", e.kind, e.t)));
            }
        }
        if y != self.terminal_y {
            return Err(Error::Domain("terminal value differs from the ledger".into()));
        }
        if (self.terminal_y >= law.y_target) != self.member_high {
            return Err(Error::GuardViolation { t: 1.0 });
        }
        Ok(())
    }
}

/// How the type of a path is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    /// `P(I) = h(0, 0)` from the membership stream.
    Drawn,
    High,
    Low,
}

/// Optional deviations from the equilibrium construction.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    /// Rate of extra orders against the insider's own direction (sells for
    /// the high type), placed before the guard and never cancelled.
    pub bluff_rate: f64,
}

/// Immutable simulator for one law; safe to share across threads.
#[derive(Debug)]
pub struct BridgeSimulator {
    law: BridgeLawParams,
    h00: f64,
    clock: ClockKernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FrameKind {
    NoiseUp,
    NoiseDown,
    LoneUp,
    CancelDown,
    OwnDown,
}

impl BridgeSimulator {
    pub fn new(law: BridgeLawParams) -> Self {
        let reach = (law.y_target.abs() + 12) as f64 + 8.0 * (2.0 * law.beta).sqrt();
        let reach = reach.ceil() as i64;
        Self {
            h00: law.h00(),
            clock: ClockKernel::new(law.beta, -reach..=reach),
            law,
        }
    }

    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        Ok(Self::new(config.law_params()?))
    }

    pub fn law(&self) -> &BridgeLawParams {
        &self.law
    }

    pub fn clock(&self) -> &ClockKernel {
        &self.clock
    }

    /// `P(I)` used by the membership draw.
    pub fn h00(&self) -> f64 {
        self.h00
    }

    pub fn noise(&self, seed: u64) -> Result<JumpTimes> {
        sample_noise_jumps(self.law.beta, 1.0, &mut RngStreams::for_seed(seed, Stream::Noise))
    }

    pub fn draw_membership(&self, seed: u64) -> bool {
        RngStreams::for_seed(seed, Stream::Membership).gen::<f64>() < self.h00
    }

    pub fn build_path(&self, seed: u64, membership: Membership) -> Result<BridgePath> {
        self.build_perturbed(seed, membership, &Perturbation::default())
    }

    pub fn build_perturbed(
        &self,
        seed: u64,
        membership: Membership,
        perturbation: &Perturbation,
    ) -> Result<BridgePath> {
        let member_high = match membership {
            Membership::Drawn => self.draw_membership(seed),
            Membership::High => true,
            Membership::Low => false,
        };
        let noise = self.noise(seed)?;
        let own = if perturbation.bluff_rate > 0.0 {
            let mut rng = RngStreams::for_seed(seed, Stream::Perturbation);
            sample_noise_jumps(perturbation.bluff_rate, GUARD_TIME, &mut rng)?.buys
        } else {
            Vec::new()
        };
        self.build_from_noise(seed, member_high, &noise, &own)
    }

    /// Runs the construction on given noise and own opposite-side orders.
    pub fn build_from_noise(&self, seed: u64, member_high: bool, noise: &JumpTimes, own: &[f64]) -> Result<BridgePath> {
        let mut lone = RngStreams::for_seed(seed, Stream::Lone);
        let mut cancel = RngStreams::for_seed(seed, Stream::Cancel);
        let mut frame = Vec::with_capacity(noise.buys.len() + noise.sells.len() + 8);
        let (target, ups, downs) = if member_high {
            (self.law.y_target, &noise.buys, &noise.sells)
        } else {
            (1 - self.law.y_target, &noise.sells, &noise.buys)
        };
        let (y, forced) = self.run_frame(target, ups, downs, own, &mut lone, &mut cancel, &mut frame)?;
        let sign = if member_high { 1 } else { -1 };
        let events = frame
            .into_iter()
            .map(|(t, kind, y)| EventMark {
                t,
                kind: frame_kind(kind, member_high),
                y_after: sign * y,
            })
            .collect();
        Ok(BridgePath {
            seed,
            member_high,
            terminal_y: sign * y,
            events,
            guard_resolutions: forced,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn run_frame(
        &self,
        target: i64,
        ups: &[f64],
        downs: &[f64],
        own: &[f64],
        lone: &mut ChaCha8Rng,
        cancel: &mut ChaCha8Rng,
        out: &mut Vec<(f64, FrameKind, i64)>,
    ) -> Result<(i64, u32)> {
        let (mut y, mut t) = (0i64, 0.0f64);
        let (mut iu, mut id, mut io) = (0usize, 0usize, 0usize);
        loop {
            let m = target - y;
            let eta: f64 = lone.gen();
            let nu = self.clock.invert(m, t, -(-eta).ln_1p())?;
            let next_up = ups.get(iu).copied().filter(|&u| u < GUARD_TIME);
            let up_time = match (nu, next_up) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            let horizon = up_time.unwrap_or(GUARD_TIME);

            let mut moved = false;
            loop {
                let nd = downs.get(id).copied().filter(|&d| d < horizon);
                let no = own.get(io).copied().filter(|&d| d < horizon);
                let noise_first = match (nd, no) {
                    (None, None) => break,
                    (Some(d), Some(o)) => d < o,
                    (Some(_), None) => true,
                    (None, Some(_)) => false,
                };
                if noise_first {
                    let d = downs[id];
                    id += 1;
                    let zeta: f64 = cancel.gen();
                    if zeta <= self.clock.keep_probability(m, d) {
                        y -= 1;
                        out.push((d, FrameKind::NoiseDown, y));
                        t = d;
                        moved = true;
                        break;
                    }
                    out.push((d, FrameKind::CancelDown, y));
                } else {
                    let o = own[io];
                    io += 1;
                    y -= 1;
                    out.push((o, FrameKind::OwnDown, y));
                    t = o;
                    moved = true;
                    break;
                }
            }
            if moved {
                continue;
            }
            match up_time {
                None => break,
                Some(u) => {
                    y += 1;
                    // ties go to the noise order
                    if next_up == Some(u) {
                        iu += 1;
                        out.push((u, FrameKind::NoiseUp, y));
                    } else {
                        out.push((u, FrameKind::LoneUp, y));
                    }
                    t = u;
                }
            }
        }

        // Past the guard h is replaced by its indicator limit: missing steps
        // are bought at once, noise buys pass, and a noise sell is kept only
        // if the constraint still holds after it.
        let need = (target - y).max(0) as usize;
        let mut tail: Vec<(f64, Option<bool>)> = (0..need)
            .map(|j| (GUARD_TIME + j as f64 * 1e-12, None))
            .chain(ups[iu..].iter().map(|&u| (u, Some(true))))
            .chain(downs[id..].iter().map(|&d| (d, Some(false))))
            .collect();
        tail.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut forced = 0u32;
        for (time, what) in tail {
            match what {
                None => {
                    if y < target {
                        y += 1;
                        forced += 1;
                        out.push((time, FrameKind::LoneUp, y));
                    }
                }
                Some(true) => {
                    y += 1;
                    out.push((time, FrameKind::NoiseUp, y));
                }
                Some(false) => {
                    if y > target {
                        y -= 1;
                        out.push((time, FrameKind::NoiseDown, y));
                    } else {
                        out.push((time, FrameKind::CancelDown, y));
                    }
                }
            }
        }
        if y < target {
            return Err(Error::GuardViolation { t: GUARD_TIME });
        }
        Ok((y, forced))
    }
}

fn frame_kind(kind: FrameKind, member_high: bool) -> EventKind {
    match (kind, member_high) {
        (FrameKind::NoiseUp, true) => EventKind::NoiseBuy,
        (FrameKind::NoiseDown, true) => EventKind::NoiseSell,
        (FrameKind::LoneUp, true) => EventKind::InsiderLoneBuy,
        (FrameKind::CancelDown, true) => EventKind::InsiderCancelSell,
        (FrameKind::OwnDown, true) => EventKind::InsiderLoneSell,
        (FrameKind::NoiseUp, false) => EventKind::NoiseSell,
        (FrameKind::NoiseDown, false) => EventKind::NoiseBuy,
        (FrameKind::LoneUp, false) => EventKind::InsiderLoneSell,
        (FrameKind::CancelDown, false) => EventKind::InsiderCancelBuy,
        (FrameKind::OwnDown, false) => EventKind::InsiderLoneBuy,
    }
}

/// One path for `config` with membership drawn from `h(0, 0)`. Builds a fresh
/// simulator; batch callers should keep a [`BridgeSimulator`] instead.
pub fn build_path(config: &ExperimentConfig, seed: u64) -> Result<BridgePath> {
    BridgeSimulator::from_config(config)?.build_path(seed, Membership::Drawn)
}

/// `n` paths of the run seeded by `master`, path `i` using `path_seed(i)`.
pub fn simulate_paths(sim: &BridgeSimulator, master: u64, n: usize, membership: Membership) -> Result<Vec<BridgePath>> {
    let streams = RngStreams::new(master);
    (0..n as u64)
        .map(|i| sim.build_path(streams.path_seed(i), membership))
        .collect()
}

#[cfg(test)]
mod tests;
