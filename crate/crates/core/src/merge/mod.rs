//! Merge kernels and the streaming merge driver.
//!
//! All kernels work on f32 buffers regardless of stored dtype; conversion to
//! the output dtype happens once, at write time. Kernels are pure, so the
//! driver may process tensors concurrently and still produce bit-identical
//! containers for a given config.

mod driver;
mod kernels;

pub use driver::{merge_checkpoints, report_path, MergeOptions};
pub use kernels::{
    dare_linear_merge, dare_sparsify, dare_ties_merge, disjoint_merge, elect_signs, linear_merge,
    slerp_merge, task_vector, ties_merge, ties_merge_detailed, trim_by_density, SignMask,
    TiesStats,
};

use serde::Serialize;
use thiserror::Error;

use crate::checkpoint::CheckpointError;
use crate::config::{ConfigError, ValidationReport};

#[derive(Debug, Error)]
pub enum MergeError {
    #[error("shape mismatch for {name:?}: {expected:?} vs {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("tensor {0:?} contains non-finite values")]
    NonFiniteInput(String),
    #[error("normalized linear merge requires a nonzero weight sum")]
    ZeroWeightSum,
    #[error("pre-merge validation failed with {} issue(s)", .0.issues.len())]
    Validation(ValidationReport),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-tensor delta from a base model: `delta[i] = model[i] - base[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskVector {
    pub name: String,
    pub delta: Vec<f32>,
    /// Position of the source model in the merge's model list.
    pub source_index: usize,
}

impl TaskVector {
    /// Elementwise scale, e.g. by a resolved per-tensor weight.
    pub fn scaled(mut self, weight: f32) -> Self {
        for v in &mut self.delta {
            *v *= weight;
        }
        self
    }
}

/// Summary of one driver run, serialized next to the merged container.
#[derive(Debug, Clone, Serialize)]
pub struct MergeReport {
    pub version: u32,
    pub method: String,
    pub tensors_merged: usize,
    pub out_dtype: String,
    pub wall_time_ms: u64,
    pub tensors: Vec<TensorMergeStats>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TensorMergeStats {
    pub name: String,
    pub method: String,
    /// Fraction of entries zeroed by trimming, one per model. Empty for
    /// methods without task vectors.
    pub trimmed_fraction: Vec<f64>,
    /// Fraction of elements where nonzero task-vector entries disagree in
    /// sign. Zero for methods without sign election.
    pub sign_conflict_fraction: f64,
}
