use std::path::{Path, PathBuf};

use clap::Args;
use mergeforge::checkpoint::TensorSpec;
use mergeforge::config::{parse_config, validate_config};

use super::{open_reader, resolve_model_paths};
use crate::outcome::{emit, CliError, CommandOutcome, EXIT_VALIDATION};

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Merge recipe document
    #[arg(long)]
    pub config: PathBuf,
    /// Base checkpoint; overrides the recipe's base_model reference
    #[arg(long)]
    pub base: Option<PathBuf>,
    /// Model checkpoints in recipe order; override the recipe's references
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
}

pub fn run(args: &ValidateArgs, json: bool) -> Result<CommandOutcome, CliError> {
    let text = std::fs::read_to_string(&args.config)?;
    let config = parse_config(&text)?;

    let base_reader = match (&args.base, &config.base_model) {
        (Some(path), _) => Some(open_reader(path)?),
        (None, Some(reference)) if config.method.requires_base() => {
            Some(open_reader(Path::new(reference))?)
        }
        _ => None,
    };
    let model_refs: Vec<String> = config.models.iter().map(|m| m.model.clone()).collect();
    let model_paths = resolve_model_paths(&model_refs, &args.models)?;
    let model_readers = model_paths
        .iter()
        .map(|p| open_reader(p))
        .collect::<Result<Vec<_>, _>>()?;

    let base_specs: Option<Vec<TensorSpec>> =
        base_reader.as_ref().map(|r| r.specs().cloned().collect());
    let model_specs: Vec<Vec<TensorSpec>> = model_readers
        .iter()
        .map(|r| r.specs().cloned().collect())
        .collect();
    let spec_refs: Vec<&[TensorSpec]> = model_specs.iter().map(|v| v.as_slice()).collect();
    let report = validate_config(&config, base_specs.as_deref(), &spec_refs);

    if json {
        let body = serde_json::json!({
            "version": 1,
            "ok": report.ok,
            "issues": report.issues,
        });
        emit(serde_json::to_string_pretty(&body).unwrap())?;
    } else if report.ok {
        emit(format!("ok: {} model(s) line up with the reference", model_readers.len()))?;
        for issue in &report.issues {
            emit(format!("note: {issue:?}"))?;
        }
    } else {
        for issue in &report.issues {
            emit(format!("issue: {issue:?}"))?;
        }
    }
    Ok(CommandOutcome {
        exit_code: if report.ok { 0 } else { EXIT_VALIDATION },
        report_path: None,
    })
}
