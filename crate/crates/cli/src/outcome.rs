use std::path::PathBuf;

use mergeforge::checkpoint::CheckpointError;
use mergeforge::config::ConfigError;
use mergeforge::corpus::CorpusError;
use mergeforge::eval::EvalError;
use mergeforge::merge::MergeError;

/// Exit code contract: 0 success, 1 validation failure (bad recipes,
/// structural mismatches, bad ratios), 2 runtime error (unreadable or
/// malformed inputs, IO).
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub report_path: Option<PathBuf>,
}

impl CommandOutcome {
    pub fn ok(report_path: Option<PathBuf>) -> Self {
        CommandOutcome {
            exit_code: EXIT_OK,
            report_path,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Merge(MergeError),
    Checkpoint(CheckpointError),
    Corpus(CorpusError),
    Eval(EvalError),
    Io(std::io::Error),
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_VALIDATION,
            CliError::Merge(MergeError::Validation(_)) => EXIT_VALIDATION,
            CliError::Merge(MergeError::Config(_)) => EXIT_VALIDATION,
            CliError::Corpus(CorpusError::BadRatio(_)) => EXIT_VALIDATION,
            _ => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Merge(e) => write!(f, "{e}"),
            CliError::Checkpoint(e) => write!(f, "{e}"),
            CliError::Corpus(e) => write!(f, "{e}"),
            CliError::Eval(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
        }
    }
}

/// Print a line to stdout, surfacing write failures (e.g. a closed pipe) as
/// errors instead of panics.
pub fn emit(text: impl AsRef<str>) -> Result<(), CliError> {
    use std::io::Write;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "{}", text.as_ref())?;
    Ok(())
}

/// Like [`emit`] but without a trailing newline.
pub fn emit_raw(text: impl AsRef<str>) -> Result<(), CliError> {
    use std::io::Write;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    out.write_all(text.as_ref().as_bytes())?;
    out.flush()?;
    Ok(())
}

macro_rules! from_error {
    ($variant:ident, $ty:ty) => {
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::$variant(e)
            }
        }
    };
}

from_error!(Config, ConfigError);
from_error!(Merge, MergeError);
from_error!(Checkpoint, CheckpointError);
from_error!(Corpus, CorpusError);
from_error!(Eval, EvalError);
from_error!(Io, std::io::Error);
