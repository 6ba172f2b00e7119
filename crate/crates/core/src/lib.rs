//! Storage, profiling and resampling for multi-agent offline-RL trajectory
//! datasets.
//!
//! Datasets live in memory as a [`TrajectoryDataset`]: one dense column per
//! field (observations, actions, rewards, terminals, optional global state)
//! plus an episode index of start offsets. On disk they are stored as vaults
//! (see [`vault`]), a small bit-exact columnar format with SHA-256 sidecars.
//!
//! On top of the model sit the analysis modules ([`stats`], [`coverage`]),
//! the dataset construction procedures ([`resample`]), a deterministic
//! fixture generator ([`synth`]) and the datasheet checker ([`lint`]).
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coverage;
pub mod error;
pub mod lint;
pub mod model;
pub mod report;
pub mod resample;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod vault;

pub use error::{Error, Result};
pub use model::{
    ActionKind, Actions, AgentSpec, EpisodeView, StateColumn, TrajectoryDataset, VaultMeta,
    Violation, FORMAT_VERSION,
};
