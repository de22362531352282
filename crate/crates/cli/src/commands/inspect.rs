use std::path::PathBuf;

use clap::Args;

use super::open_reader;
use crate::outcome::{emit, CliError, CommandOutcome};

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Container file or shard index (*.index.json)
    pub checkpoint: PathBuf,
}

pub fn run(args: &InspectArgs, json: bool) -> Result<CommandOutcome, CliError> {
    let reader = open_reader(&args.checkpoint)?;

    if json {
        let tensors: Vec<serde_json::Value> = reader
            .specs()
            .map(|s| {
                serde_json::json!({
                    "name": s.name,
                    "dtype": s.dtype.as_str(),
                    "shape": s.shape,
                    "bytes": s.byte_len(),
                })
            })
            .collect();
        let total_bytes: usize = reader.specs().map(|s| s.byte_len()).sum();
        let body = serde_json::json!({
            "version": 1,
            "tensors": tensors,
            "tensor_count": reader.len(),
            "total_bytes": total_bytes,
            "metadata": reader.metadata(),
        });
        emit(serde_json::to_string_pretty(&body).unwrap())?;
        return Ok(CommandOutcome::ok(None));
    }

    let name_width = reader
        .names()
        .map(str::len)
        .max()
        .unwrap_or(4)
        .max("name".len());
    emit(format!("{:<name_width$}  {:<5} {:<16} {:>12}", "name", "dtype", "shape", "bytes"))?;
    let mut total_bytes = 0usize;
    for spec in reader.specs() {
        let shape = format!("{:?}", spec.shape);
        emit(format!(
            "{:<name_width$}  {:<5} {:<16} {:>12}",
            spec.name,
            spec.dtype.as_str(),
            shape,
            spec.byte_len()
        ))?;
        total_bytes += spec.byte_len();
    }
    emit(format!(
        "{:<name_width$}  {:<5} {:<16} {:>12}",
        "total",
        "",
        format!("{} tensors", reader.len()),
        total_bytes
    ))?;
    Ok(CommandOutcome::ok(None))
}
