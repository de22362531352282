use std::path::{Path, PathBuf};

use clap::Args;
use mergeforge::corpus::{
    mix_corpora, read_shard_records, DocumentSink, JsonlShardSink, MixRatio, ShardRecord,
    WordCountEstimator,
};

use crate::outcome::{emit, CliError, CommandOutcome};
use crate::settings::Settings;

#[derive(Debug, Args)]
pub struct MixArgs {
    /// Directory of domain shards (*.jsonl)
    #[arg(long)]
    pub domain: PathBuf,
    /// Directory of general shards (*.jsonl)
    #[arg(long)]
    pub general: PathBuf,
    /// Output directory for the interleaved shards
    #[arg(long)]
    pub out: PathBuf,
    /// Domain:general token ratio, e.g. 70:1
    #[arg(long)]
    pub ratio: String,
    /// Shard size cap in bytes
    #[arg(long)]
    pub shard_bytes: Option<u64>,
}

fn load_shard_dir(dir: &Path) -> Result<Vec<ShardRecord>, CliError> {
    let mut shard_paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "jsonl"))
        .collect();
    shard_paths.sort();
    let mut records = Vec::new();
    for path in shard_paths {
        records.extend(read_shard_records(&path)?);
    }
    Ok(records)
}

pub fn run(args: &MixArgs, settings: &Settings, json: bool) -> Result<CommandOutcome, CliError> {
    let ratio: MixRatio = args.ratio.parse()?;
    let domain = load_shard_dir(&args.domain)?;
    let general = load_shard_dir(&args.general)?;

    let estimator = WordCountEstimator;
    let mut sink = JsonlShardSink::new(
        &args.out,
        args.shard_bytes.unwrap_or(settings.shard_bytes),
    )?;
    let mut mixer = mix_corpora(domain, general, ratio, &estimator);
    let written: Result<(), std::io::Error> = (|| {
        for doc in mixer.by_ref() {
            sink.write_record(&doc.record)?;
        }
        Ok(())
    })();
    let stats = match written {
        Ok(()) => {
            sink.finish()?;
            mixer.stats()
        }
        Err(e) => {
            let _ = sink.abort();
            return Err(e.into());
        }
    };

    let stats_path = args.out.join("mix-stats.json");
    let body = serde_json::json!({
        "version": 1,
        "ratio": args.ratio,
        "stats": stats,
    });
    std::fs::write(&stats_path, serde_json::to_string_pretty(&body).unwrap())?;

    if json {
        emit(serde_json::to_string_pretty(&body).unwrap())?;
    } else {
        settings.info(format!(
            "mixed {} domain + {} general token(s) into {}",
            stats.domain_tokens,
            stats.general_tokens,
            args.out.display()
        ));
    }
    Ok(CommandOutcome::ok(Some(stats_path)))
}
