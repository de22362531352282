use std::path::{Path, PathBuf};

use clap::Args;
use mergeforge::checkpoint::TensorSpec;
use mergeforge::config::{parse_config, validate_config, MergeConfig, ValidationReport};
use mergeforge::merge::{merge_checkpoints, MergeError, MergeOptions};

use super::{open_reader, resolve_model_paths};
use crate::outcome::{emit, CliError, CommandOutcome, EXIT_VALIDATION};
use crate::settings::Settings;

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// Merge recipe document
    #[arg(long)]
    pub config: PathBuf,
    /// Output container path
    #[arg(long)]
    pub out: PathBuf,
    /// Base checkpoint; overrides the recipe's base_model reference
    #[arg(long)]
    pub base: Option<PathBuf>,
    /// Model checkpoints in recipe order; override the recipe's references
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    /// Override the inferred layer count
    #[arg(long)]
    pub layer_count: Option<usize>,
    /// Validate only; write no container
    #[arg(long)]
    pub dry_run: bool,
}

fn validation_report_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".validation.json");
    out.with_file_name(name)
}

fn write_validation_json(
    path: &Path,
    ok: bool,
    report: Option<&ValidationReport>,
    error: Option<&str>,
) -> std::io::Result<()> {
    let body = serde_json::json!({
        "version": 1,
        "ok": ok,
        "issues": report.map(|r| serde_json::to_value(&r.issues).unwrap()),
        "error": error,
    });
    std::fs::write(path, serde_json::to_string_pretty(&body).unwrap())
}

pub fn run(args: &MergeArgs, settings: &Settings, json: bool) -> Result<CommandOutcome, CliError> {
    let text = std::fs::read_to_string(&args.config)?;
    let report_out = validation_report_path(&args.out);

    let config: MergeConfig = match parse_config(&text) {
        Ok(config) => config,
        Err(err) => {
            // leave a machine-readable trace of what failed to validate
            write_validation_json(&report_out, false, None, Some(&err.to_string()))?;
            eprintln!("error: {err}");
            return Ok(CommandOutcome {
                exit_code: EXIT_VALIDATION,
                report_path: Some(report_out),
            });
        }
    };

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
    let reader_refs: Vec<&_> = model_readers.iter().collect();

    if args.dry_run {
        let base_specs: Option<Vec<TensorSpec>> =
            base_reader.as_ref().map(|r| r.specs().cloned().collect());
        let model_specs: Vec<Vec<TensorSpec>> = model_readers
            .iter()
            .map(|r| r.specs().cloned().collect())
            .collect();
        let spec_refs: Vec<&[TensorSpec]> = model_specs.iter().map(|v| v.as_slice()).collect();
        let report = validate_config(&config, base_specs.as_deref(), &spec_refs);
        write_validation_json(&report_out, report.ok, Some(&report), None)?;
        if json {
            emit(serde_json::to_string_pretty(&report).unwrap())?;
        } else {
            settings.info(format!(
                "dry run: {} ({} issue(s), report at {})",
                if report.ok { "ok" } else { "validation failed" },
                report.issues.len(),
                report_out.display()
            ));
        }
        return Ok(CommandOutcome {
            exit_code: if report.ok { 0 } else { EXIT_VALIDATION },
            report_path: Some(report_out),
        });
    }

    let options = MergeOptions {
        workers: settings.workers,
        layer_count: args.layer_count,
    };
    match merge_checkpoints(
        &config,
        base_reader.as_ref(),
        &reader_refs,
        &args.out,
        &options,
    ) {
        Ok(report) => {
            let report_path = mergeforge::merge::report_path(&args.out);
            if json {
                emit(serde_json::to_string_pretty(&report).unwrap())?;
            } else {
                settings.info(format!(
                    "merged {} tensor(s) with {} into {} in {} ms",
                    report.tensors_merged,
                    report.method,
                    args.out.display(),
                    report.wall_time_ms
                ));
            }
            Ok(CommandOutcome::ok(Some(report_path)))
        }
        Err(MergeError::Validation(report)) => {
            write_validation_json(&report_out, false, Some(&report), None)?;
            eprintln!(
                "error: validation failed with {} issue(s); see {}",
                report.issues.len(),
                report_out.display()
            );
            Ok(CommandOutcome {
                exit_code: EXIT_VALIDATION,
                report_path: Some(report_out),
            })
        }
        Err(err) => Err(err.into()),
    }
}
