//! Named, independently seeded random streams derived from one master seed.
//!
//! Each `(master, index, stream)` triple is hashed through SplitMix64 into a
//! 256-bit ChaCha8 key, so paths can be simulated in any order (or in
//! parallel) and still reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Stream names. Their discriminants are part of the reproducibility contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    /// Noise buy and sell jump times.
    Noise = 1,
    /// The membership draw for `I`.
    Membership = 2,
    /// Uniforms driving the lone-order clock.
    Lone = 3,
    /// Uniforms deciding cancellations.
    Cancel = 4,
    /// Extra orders placed by perturbed strategies.
    Perturbation = 5,
    /// Gaussian increments of limit diffusions.
    Diffusion = 6,
    /// Anything drawn directly by a test or experiment driver.
    Auxiliary = 7,
}

impl Stream {
    pub const ALL: [Stream; 7] = [
        Stream::Noise,
        Stream::Membership,
        Stream::Lone,
        Stream::Cancel,
        Stream::Perturbation,
        Stream::Diffusion,
        Stream::Auxiliary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stream::Noise => "noise",
            Stream::Membership => "membership",
            Stream::Lone => "lone",
            Stream::Cancel => "cancel",
            Stream::Perturbation => "perturbation",
            Stream::Diffusion => "diffusion",
            Stream::Auxiliary => "auxiliary",
        }
    }
}

/// Factory for the sub-streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStreams {
    master: u64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStreams {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Seed identifying path `index` within this run.
    pub fn path_seed(&self, index: u64) -> u64 {
        let mut s = self.master ^ 0x6A09_E667_F3BC_C908;
        splitmix64(&mut s);
        s ^= index.wrapping_mul(0xD1B5_4A32_D192_ED03);
        splitmix64(&mut s)
    }

    /// Generator for `stream` of the path whose seed is `path_seed`.
    pub fn for_seed(path_seed: u64, stream: Stream) -> ChaCha8Rng {
        let mut s = path_seed ^ (stream as u64).wrapping_mul(0xA076_1D64_78BD_642F);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// Generator for `stream` of path `index`.
    pub fn stream(&self, index: u64, stream: Stream) -> ChaCha8Rng {
        Self::for_seed(self.path_seed(index), stream)
    }
}
