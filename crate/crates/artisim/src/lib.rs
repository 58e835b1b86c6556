//! Physics-based two-hand grasping and articulation of hinged objects.
//!
//! The crate bundles everything needed to synthesize hand-object motion on a
//! desk-scale budget:
//!
//! - [`sim`] — deterministic reduced-coordinate rigid-body simulation with
//!   penalty contacts and PD actuation.
//! - [`models`] — the 51-DoF primitive hand and two-part hinged objects,
//!   forward kinematics, and frame utilities.
//! - [`env`] — the RL environment: feature extraction, the composite reward,
//!   episode reset and termination.
//! - [`learn`] — Gaussian MLP policies, GAE, and clipped-surrogate PPO.
//! - [`curriculum`] — the two-phase training scheme (fixed-base single-hand,
//!   then free-base shared environment) and its ablation toggles.
//! - [`sequence`] — the grasp / relocate / release / approach / articulate
//!   task state machine.
//! - [`data`] — reference extraction from motion sequences, dataset splits,
//!   and target samplers.
//! - [`eval`] — metrics, scripted baselines, and the batch evaluation grid.
//! - [`commands`] — the operations behind the `arti` command-line tool.
//!
//! Start with the runnable examples (`cargo run --release -p artisim
//! --example <name>`); each one exercises a single subsystem end to end.

pub mod data;
pub mod env;
pub mod learn;
pub mod math;
pub mod models;
pub mod sim;
