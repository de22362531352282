use std::path::PathBuf;

use clap::Args;
use mergeforge::eval::{compare_variants, load_nll_file, perplexity, render_table, TableFormat};

use crate::outcome::{emit, emit_raw, CliError, CommandOutcome};
use crate::settings::Settings;

#[derive(Debug, Args)]
pub struct PplArgs {
    /// NLL files, one per (dataset, variant) pair
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Write the comparison table as CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a grouped-bar SVG
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

pub fn run(args: &PplArgs, settings: &Settings, json: bool) -> Result<CommandOutcome, CliError> {
    let mut reports = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        let stream = load_nll_file(path)?;
        settings.info(format!(
            "{}: {} token(s) for dataset={} variant={}",
            path.display(),
            stream.values.len(),
            stream.dataset,
            stream.variant
        ));
        reports.push(perplexity(&stream)?);
    }
    let table = compare_variants(reports)?;

    if let Some(out) = &args.out {
        std::fs::write(out, render_table(&table, TableFormat::Csv))?;
    }
    if let Some(svg) = &args.svg {
        std::fs::write(svg, render_table(&table, TableFormat::SvgBars))?;
    }

    if json {
        emit(serde_json::to_string_pretty(&table).unwrap())?;
    } else {
        emit_raw(render_table(&table, TableFormat::Text))?;
    }
    Ok(CommandOutcome::ok(args.out.clone()))
}
