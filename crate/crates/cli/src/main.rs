mod commands;
mod outcome;
mod settings;

use clap::{Parser, Subcommand};

use outcome::{CliError, CommandOutcome};
use settings::Settings;

#[derive(Parser)]
#[command(
    name = "mergeforge",
    version,
    about = "Merge fine-tuned checkpoints, prepare filing corpora, and compare perplexity"
)]
struct Cli {
    /// Emit machine-readable JSON instead of text where supported
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for merge and clean (also MF_WORKERS)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// off, error, info, or debug (also MF_LOG_LEVEL)
    #[arg(long, global = true)]
    log_level: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Merge model checkpoints per a recipe document
    Merge(commands::merge::MergeArgs),
    /// List a container's tensors and totals
    Inspect(commands::inspect::InspectArgs),
    /// Check a recipe against actual checkpoints without merging
    Validate(commands::validate::ValidateArgs),
    /// Clean a raw document tree into JSON-lines shards
    Clean(commands::clean::CleanArgs),
    /// Interleave domain and general shards at a token ratio
    Mix(commands::mix::MixArgs),
    /// Compute perplexity from NLL files and render a comparison table
    Ppl(commands::ppl::PplArgs),
}

fn dispatch(cli: &Cli, settings: &Settings) -> Result<CommandOutcome, CliError> {
    match &cli.command {
        Command::Merge(args) => commands::merge::run(args, settings, cli.json),
        Command::Inspect(args) => commands::inspect::run(args, cli.json),
        Command::Validate(args) => commands::validate::run(args, cli.json),
        Command::Clean(args) => commands::clean::run(args, settings, cli.json),
        Command::Mix(args) => commands::mix::run(args, settings, cli.json),
        Command::Ppl(args) => commands::ppl::run(args, settings, cli.json),
    }
}

fn main() {
    let cli = Cli::parse();
    let settings = Settings::resolve(cli.workers, cli.log_level.as_deref(), None, None);
    let code = match dispatch(&cli, &settings) {
        Ok(outcome) => {
            if let Some(path) = &outcome.report_path {
                settings.debug(format!("report: {}", path.display()));
            }
            outcome.exit_code
        }
        // a consumer closing the pipe mid-output is not a failure
        Err(CliError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    };
    std::process::exit(code);
}
