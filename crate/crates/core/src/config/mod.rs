//! Declarative merge recipes.
//!
//! A recipe names a merge method, a base model, and per-model `weight` and
//! `density` parameters. A parameter is a schedule: an ordered list of rules,
//! each with an optional tensor-name filter and a list of anchor values that
//! interpolate piecewise-linearly across normalized layer position. Scalar
//! parameters are single-anchor schedules.

mod parse;
mod validate;

pub use parse::{parse_config, to_yaml};
pub use validate::{validate_config, ValidationIssue, ValidationReport};

use thiserror::Error;

use crate::checkpoint::{DType, TensorSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("unknown merge method {0:?}")]
    UnknownMethod(String),
    #[error("merge method {0} requires a base_model")]
    MissingBaseModel(&'static str),
    #[error("config schema: {0}")]
    Schema(String),
    #[error("no schedule rule applies to tensor {0:?}")]
    NoApplicableRule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MergeMethod {
    Ties,
    Linear,
    Slerp,
    DareTies,
    DareLinear,
}

impl MergeMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            MergeMethod::Ties => "ties",
            MergeMethod::Linear => "linear",
            MergeMethod::Slerp => "slerp",
            MergeMethod::DareTies => "dare_ties",
            MergeMethod::DareLinear => "dare_linear",
        }
    }

    pub fn requires_base(self) -> bool {
        matches!(
            self,
            MergeMethod::Ties | MergeMethod::DareTies | MergeMethod::DareLinear
        )
    }
}

impl std::fmt::Display for MergeMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One filter → anchors rule. A rule with no filter is the default rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleRule {
    pub filter: Option<String>,
    pub anchors: Vec<f64>,
}

/// Ordered rules resolving a scalar parameter per tensor name.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSchedule {
    pub rules: Vec<ScheduleRule>,
}

impl ParameterSchedule {
    /// A schedule that resolves to `value` for every tensor.
    pub fn constant(value: f64) -> Self {
        ParameterSchedule {
            rules: vec![ScheduleRule {
                filter: None,
                anchors: vec![value],
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEntry {
    /// Checkpoint reference: a path or an identifier resolved by the caller.
    pub model: String,
    pub weight: ParameterSchedule,
    pub density: ParameterSchedule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeConfig {
    pub method: MergeMethod,
    pub base_model: Option<String>,
    pub models: Vec<ModelEntry>,
    pub normalize: bool,
    pub int8_mask: bool,
    pub out_dtype: DType,
    /// Interpolation position, slerp only.
    pub t: Option<f64>,
    /// Drop seed, dare only.
    pub seed: Option<u64>,
}

/// Layer index from a dot-separated tensor path: the integer following a
/// `layers` segment, e.g. `model.layers.12.mlp.down_proj.weight` -> 12.
pub fn extract_layer_index(tensor_name: &str) -> Option<usize> {
    let mut segments = tensor_name.split('.');
    while let Some(seg) = segments.next() {
        if seg == "layers" {
            if let Some(next) = segments.next() {
                if !next.is_empty() && next.bytes().all(|b| b.is_ascii_digit()) {
                    return next.parse().ok();
                }
            }
        }
    }
    None
}

/// Piecewise-linear interpolation over anchors placed at j/(n-1).
///
/// Exact at anchor positions, including both endpoints; a single anchor is a
/// constant schedule.
pub fn interpolate_anchors(anchors: &[f64], f: f64) -> f64 {
    let n = anchors.len();
    assert!(n > 0, "anchor list must be non-empty");
    if n == 1 {
        return anchors[0];
    }
    let f = f.clamp(0.0, 1.0);
    let last = (n - 1) as f64;
    // exact hits first, so anchor positions reproduce their values bit-for-bit
    for (j, &a) in anchors.iter().enumerate() {
        if f == j as f64 / last {
            return a;
        }
    }
    let seg = ((f * last).floor() as usize).min(n - 2);
    let lo = seg as f64 / last;
    let hi = (seg + 1) as f64 / last;
    let frac = ((f - lo) / (hi - lo)).clamp(0.0, 1.0);
    anchors[seg] + frac * (anchors[seg + 1] - anchors[seg])
}

/// Resolve a schedule for one tensor: first rule (declaration order) whose
/// filter is a substring of the name wins, else the default rule; the anchors
/// are then interpolated at the tensor's normalized layer position.
///
/// Tensors without a layer index resolve at f=0 when their name contains
/// `embed` (they sit before layer 0 in the forward order) and at f=1
/// otherwise (output heads and final norms sit after the last layer).
pub fn resolve_parameter(
    schedule: &ParameterSchedule,
    tensor_name: &str,
    layer_count: usize,
) -> Result<f64, ConfigError> {
    assert!(layer_count >= 1, "layer_count must be positive");
    let rule = schedule
        .rules
        .iter()
        .find(|r| match &r.filter {
            Some(f) => tensor_name.contains(f.as_str()),
            None => true,
        })
        .ok_or_else(|| ConfigError::NoApplicableRule(tensor_name.to_string()))?;
    let f = match extract_layer_index(tensor_name) {
        Some(idx) => {
            if layer_count == 1 {
                0.0
            } else {
                (idx as f64 / (layer_count - 1) as f64).clamp(0.0, 1.0)
            }
        }
        None if tensor_name.contains("embed") => 0.0,
        None => 1.0,
    };
    Ok(interpolate_anchors(&rule.anchors, f))
}

/// Layer count inferred from a spec set: 1 + the highest layer index seen,
/// or 1 when no tensor carries one.
pub fn infer_layer_count<'a>(specs: impl IntoIterator<Item = &'a TensorSpec>) -> usize {
    specs
        .into_iter()
        .filter_map(|s| extract_layer_index(&s.name))
        .max()
        .map(|m| m + 1)
        .unwrap_or(1)
}
