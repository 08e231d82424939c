pub mod bessel;
pub mod bridge;
pub mod config;
pub mod equilibrium;
pub mod error;
pub mod kyle;
pub mod law;
pub mod quad;
pub mod rng;
pub mod skellam;
pub mod verify;

/// Version of the library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use bridge::{BridgePath, BridgeSimulator, EventKind, EventMark, Membership};
pub use config::{ExperimentConfig, YTargetMode};
pub use error::{Error, Result};
pub use law::{BridgeLawParams, LatticeState, Side};
pub use rng::{RngStreams, Stream};
pub use skellam::{JumpTimes, SkellamParams};
