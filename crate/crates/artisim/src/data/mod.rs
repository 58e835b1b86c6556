//! Datasets: recorded manipulation sequences, reference extraction,
//! train/test splits, and target samplers.
//!
//! The pipeline is: a motion sequence (recorded or synthesized) →
//! [`extract_references`] mines one static hand pose per interaction →
//! [`split_items`] deals them into train/test per object → samplers draw
//! the evaluation targets. Every stage is a pure function of its inputs
//! and seeds, so datasets can be rebuilt bit-for-bit from the manifest.

pub mod extract;
pub mod samplers;
pub mod sequence;
pub mod split;
pub mod synthetic;

use thiserror::Error;

pub use extract::{
    extract_references, ExtractedReference, ExtractionThresholds, InteractionKind,
    InteractionSegment,
};
pub use samplers::{
    articulation_target_angles, sample_grasp_targets, sample_task_targets, TaskTarget,
    DEFAULT_GRASP_TARGETS,
};
pub use sequence::{
    load_sequence, parse_sequence, save_sequence, write_sequence, MocapFrame, MocapSequence,
};
pub use split::{split_items, SplitManifest, SplitOutcome};
pub use synthetic::{
    authored_articulation, authored_grasp, mirrored_left, synthetic_sequence, AuthoredPose,
};

/// Dataset file and pipeline errors.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("malformed data file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
}

impl DataError {
    pub fn bad(msg: impl Into<String>) -> Self {
        DataError::Malformed(msg.into())
    }
}
