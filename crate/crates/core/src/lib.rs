//! Merge domain-adapted checkpoints back into their base models, prepare
//! training corpora, and compare model variants by perplexity.
//!
//! The crate is organized around five subsystems:
//!
//! - [`checkpoint`]: the header-indexed binary tensor container and dtype
//!   conversions, with streaming per-tensor access.
//! - [`config`]: the declarative merge recipe — methods, per-model weight and
//!   density schedules with tensor-name filters and per-layer anchors.
//! - [`merge`]: the merge kernels (ties, linear, slerp, dare) and the
//!   streaming driver that writes a merged checkpoint.
//! - [`corpus`]: document cleaning pipeline (format gating, HTML extraction,
//!   normalization) and ratio-controlled corpus mixing.
//! - [`eval`]: perplexity from negative-log-likelihood streams and
//!   multi-variant comparison tables.

pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod merge;
