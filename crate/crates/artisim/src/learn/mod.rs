//! Policy optimization: networks, the clipped-surrogate update, rollout
//! collection, and checkpoints.
//!
//! The stack is deliberately small and deterministic end to end — f64
//! everywhere, hand-written backprop, seeded counter RNGs, serial
//! floating-point reductions — so a training run can be reproduced
//! bit-for-bit from its seed and config. See the submodule docs for where
//! each piece of that guarantee lives.

pub mod checkpoint;
pub mod net;
pub mod policy;
pub mod ppo;
pub mod rollout;

use thiserror::Error;

pub use checkpoint::{checksum64, Checkpoint};
pub use net::{clip_grad_norm, gradient_check, Adam, Mlp};
pub use policy::{ActOutput, ObsNormalizer, Policy};
pub use ppo::{
    clipped_surrogate, gae, ppo_update, standardize, SampleBatch, TrainConfig, UpdateStats,
};
pub use rollout::{
    assemble_batch, collect_rollouts, mix_seed, run_training, EpisodeEnv, EpochReport,
    StepOutcome, Transition, WorkerRollout,
};

/// Faults the training stack can raise.
#[derive(Debug, Error)]
pub enum LearnError {
    /// A network produced NaN or infinity; the checksum identifies the
    /// exact parameter snapshot that did it.
    #[error("network produced a non-finite output (param checksum {checksum:016x})")]
    NonFiniteNetwork { checksum: u64 },
    #[error(transparent)]
    Env(#[from] crate::env::EnvFault),
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
}
