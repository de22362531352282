//! Filing corpus preparation: format gating, HTML extraction, cleaning,
//! concurrent shard writing, and ratio-controlled mixing of a domain corpus
//! with a general one.

mod clean;
mod detect;
mod extract;
mod mix;
mod pipeline;

pub use clean::clean_text;
pub use detect::detect_format;
pub use extract::extract_text;
pub use mix::{mix_corpora, MixRatio, MixStats, MixedDocument, MixOrigin, Mixer};
pub use pipeline::{
    process_document, read_shard_records, run_pipeline, DocumentSink, DocumentSource, FsSource,
    JsonlShardSink, RawDocument, ShardRecord,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("input is not HTML")]
    NotHtml,
    #[error("bad mix ratio {0:?}: expected D:G with positive integers")]
    BadRatio(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Detected document format. Magic bytes win over extensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocFormat {
    Html,
    Markdown,
    Plaintext,
    Pdf,
    Excel,
    Zip,
    Unknown,
}

impl DocFormat {
    pub fn label(self) -> &'static str {
        match self {
            DocFormat::Html => "html",
            DocFormat::Markdown => "markdown",
            DocFormat::Plaintext => "plaintext",
            DocFormat::Pdf => "pdf",
            DocFormat::Excel => "excel",
            DocFormat::Zip => "zip",
            DocFormat::Unknown => "unknown",
        }
    }
}

impl std::fmt::Display for DocFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for DocFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "html" => Ok(DocFormat::Html),
            "markdown" | "md" => Ok(DocFormat::Markdown),
            "plaintext" | "text" | "txt" => Ok(DocFormat::Plaintext),
            "pdf" => Ok(DocFormat::Pdf),
            "excel" => Ok(DocFormat::Excel),
            "zip" => Ok(DocFormat::Zip),
            "unknown" => Ok(DocFormat::Unknown),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

/// Why a document was excluded from the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    RejectedFormat(DocFormat),
    TooShort,
}

impl DropReason {
    /// Stats key: the format label for rejections, `too_short` otherwise.
    pub fn label(self) -> &'static str {
        match self {
            DropReason::RejectedFormat(f) => f.label(),
            DropReason::TooShort => "too_short",
        }
    }
}

/// A document moving through the pipeline, annotated as it goes.
#[derive(Debug, Clone)]
pub struct DocumentRecord {
    pub id: String,
    pub source: String,
    pub raw: Vec<u8>,
    pub format: DocFormat,
    pub text: Option<String>,
    pub drop_reason: Option<DropReason>,
    pub token_estimate: u64,
}

/// Acceptance policy for the cleaning pipeline.
#[derive(Debug, Clone)]
pub struct PipelinePolicy {
    pub accepted: Vec<DocFormat>,
    pub min_chars: usize,
}

impl Default for PipelinePolicy {
    fn default() -> Self {
        PipelinePolicy {
            accepted: vec![DocFormat::Html, DocFormat::Markdown, DocFormat::Plaintext],
            min_chars: 1,
        }
    }
}

/// Counters for one pipeline run. `read == written + Σ dropped` always.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PipelineStats {
    pub read: u64,
    pub extracted: u64,
    pub written: u64,
    pub dropped: BTreeMap<String, u64>,
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub elapsed_ms: u64,
}

impl PipelineStats {
    pub fn dropped_total(&self) -> u64 {
        self.dropped.values().sum()
    }
}

/// Proportional token accounting for mixing. The default estimator is a
/// whitespace word count scaled by 1.3 and rounded up; real tokenizers are
/// out of scope, mixing only needs consistent proportions.
pub trait TokenEstimator: Sync {
    fn estimate(&self, text: &str) -> u64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WordCountEstimator;

impl TokenEstimator for WordCountEstimator {
    fn estimate(&self, text: &str) -> u64 {
        (text.split_whitespace().count() as f64 * 1.3).ceil() as u64
    }
}
