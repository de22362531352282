//! Perplexity over per-token negative-log-likelihood streams, and comparison
//! tables across model variants.
//!
//! The harness consumes NLLs produced by an external inference runner; it
//! never runs a model itself. Values are natural-log (nats) by convention of
//! the file format — producers working in bits must convert.

mod nll_file;
mod render;

pub use nll_file::{load_nll_file, write_nll_file};
pub use render::{render_table, TableFormat};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("NLL stream is empty")]
    EmptyStream,
    #[error("non-finite NLL at index {0}")]
    NonFiniteValue(usize),
    #[error("negative NLL {value} at line {line}")]
    NegativeValue { line: usize, value: f64 },
    #[error("malformed NLL file: {0}")]
    MalformedFile(String),
    #[error("duplicate cell for dataset {dataset:?}, variant {variant:?}")]
    DuplicateCell { dataset: String, variant: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-token negative log-likelihoods for one (dataset, variant) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct NllStream {
    pub dataset: String,
    pub variant: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerplexityReport {
    pub dataset: String,
    pub variant: String,
    pub token_count: usize,
    pub mean_nll: f64,
    pub perplexity: f64,
}

/// Pairwise (tree) sum: deterministic, and exact for 2^k identical values.
fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Perplexity = exp(mean NLL) over the stream.
pub fn perplexity(stream: &NllStream) -> Result<PerplexityReport, EvalError> {
    if stream.values.is_empty() {
        return Err(EvalError::EmptyStream);
    }
    if let Some(i) = stream.values.iter().position(|v| !v.is_finite()) {
        return Err(EvalError::NonFiniteValue(i));
    }
    let mean_nll = pairwise_sum(&stream.values) / stream.values.len() as f64;
    Ok(PerplexityReport {
        dataset: stream.dataset.clone(),
        variant: stream.variant.clone(),
        token_count: stream.values.len(),
        mean_nll,
        perplexity: mean_nll.exp(),
    })
}

/// Datasets down the side, variants across the top, reports in the cells.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonTable {
    /// Row labels in first-seen order.
    pub datasets: Vec<String>,
    /// Column labels in first-seen order.
    pub variants: Vec<String>,
    /// `cells[row][col]`, `None` where no report was supplied.
    pub cells: Vec<Vec<Option<PerplexityReport>>>,
}

impl ComparisonTable {
    pub fn cell(&self, dataset: &str, variant: &str) -> Option<&PerplexityReport> {
        let row = self.datasets.iter().position(|d| d == dataset)?;
        let col = self.variants.iter().position(|v| v == variant)?;
        self.cells[row][col].as_ref()
    }
}

/// Group reports into a table; a duplicate (dataset, variant) pair is an
/// error rather than a silent overwrite.
pub fn compare_variants(reports: Vec<PerplexityReport>) -> Result<ComparisonTable, EvalError> {
    let mut datasets: Vec<String> = Vec::new();
    let mut variants: Vec<String> = Vec::new();
    for report in &reports {
        if !datasets.contains(&report.dataset) {
            datasets.push(report.dataset.clone());
        }
        if !variants.contains(&report.variant) {
            variants.push(report.variant.clone());
        }
    }
    let mut cells: Vec<Vec<Option<PerplexityReport>>> =
        vec![vec![None; variants.len()]; datasets.len()];
    for report in reports {
        let row = datasets.iter().position(|d| *d == report.dataset).unwrap();
        let col = variants.iter().position(|v| *v == report.variant).unwrap();
        if cells[row][col].is_some() {
            return Err(EvalError::DuplicateCell {
                dataset: report.dataset,
                variant: report.variant,
            });
        }
        cells[row][col] = Some(report);
    }
    Ok(ComparisonTable {
        datasets,
        variants,
        cells,
    })
}
