use std::path::PathBuf;

use clap::Args;
use mergeforge::corpus::{run_pipeline, DocFormat, FsSource, JsonlShardSink, PipelinePolicy};

use crate::outcome::{emit, CliError, CommandOutcome};
use crate::settings::Settings;

#[derive(Debug, Args)]
pub struct CleanArgs {
    /// Directory tree of raw documents
    #[arg(long)]
    pub src: PathBuf,
    /// Output directory for shards and stats
    #[arg(long)]
    pub dst: PathBuf,
    /// Comma-separated accepted formats
    #[arg(long, value_delimiter = ',', default_values_t = [
        DocFormat::Html, DocFormat::Markdown, DocFormat::Plaintext,
    ])]
    pub accept: Vec<DocFormat>,
    /// Drop cleaned documents shorter than this many characters
    #[arg(long)]
    pub min_chars: Option<usize>,
    /// Shard size cap in bytes
    #[arg(long)]
    pub shard_bytes: Option<u64>,
}

pub fn run(args: &CleanArgs, settings: &Settings, json: bool) -> Result<CommandOutcome, CliError> {
    let policy = PipelinePolicy {
        accepted: args.accept.clone(),
        min_chars: args.min_chars.unwrap_or(settings.min_chars),
    };
    let shard_bytes = args.shard_bytes.unwrap_or(settings.shard_bytes);

    let mut source = FsSource::new(&args.src)?;
    let mut sink = JsonlShardSink::new(&args.dst, shard_bytes)?;
    let stats = run_pipeline(&mut source, &mut sink, &policy, settings.workers)?;

    let stats_path = args.dst.join("stats.json");
    let body = serde_json::json!({
        "version": 1,
        "stats": stats,
        "shards": sink
            .shard_paths()
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect::<Vec<_>>(),
    });
    std::fs::write(&stats_path, serde_json::to_string_pretty(&body).unwrap())?;

    if json {
        emit(serde_json::to_string_pretty(&body).unwrap())?;
    } else {
        settings.info(format!(
            "read {}, wrote {}, dropped {} into {} shard(s) at {}",
            stats.read,
            stats.written,
            stats.dropped_total(),
            sink.shard_paths().len(),
            args.dst.display()
        ));
    }
    Ok(CommandOutcome::ok(Some(stats_path)))
}
