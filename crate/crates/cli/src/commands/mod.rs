pub mod clean;
pub mod inspect;
pub mod merge;
pub mod mix;
pub mod ppl;
pub mod validate;

use std::path::Path;

use mergeforge::checkpoint::CheckpointReader;

use crate::outcome::CliError;

/// Open a container, routing `*.index.json` paths through the sharded reader.
pub fn open_reader(path: &Path) -> Result<CheckpointReader, CliError> {
    let sharded = path
        .file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.ends_with(".index.json"));
    let reader = if sharded {
        CheckpointReader::open_sharded(path)?
    } else {
        CheckpointReader::open(path)?
    };
    Ok(reader)
}

/// Model checkpoint paths: explicit `--model` flags override the config's
/// references in order; otherwise the references are used as paths.
pub fn resolve_model_paths(
    config_refs: &[String],
    flag_paths: &[std::path::PathBuf],
) -> Result<Vec<std::path::PathBuf>, CliError> {
    if flag_paths.is_empty() {
        return Ok(config_refs.iter().map(std::path::PathBuf::from).collect());
    }
    if flag_paths.len() != config_refs.len() {
        return Err(CliError::Usage(format!(
            "config lists {} model(s) but {} --model flag(s) were given",
            config_refs.len(),
            flag_paths.len()
        )));
    }
    Ok(flag_paths.to_vec())
}
