use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::kernels::{
    dare_linear_merge, dare_ties_merge, linear_merge, slerp_merge, ties_merge_detailed, TiesStats,
};
use super::{MergeError, MergeReport, TensorMergeStats};
use crate::checkpoint::{convert_dtype, CheckpointReader, CheckpointWriter, Tensor, TensorSpec};
use crate::config::{
    infer_layer_count, resolve_parameter, validate_config, MergeConfig, MergeMethod,
};

#[derive(Debug, Clone)]
pub struct MergeOptions {
    /// Tensors merged concurrently. The output container is bit-identical
    /// for every worker count.
    pub workers: usize,
    /// Override for the inferred layer count.
    pub layer_count: Option<usize>,
}

impl Default for MergeOptions {
    fn default() -> Self {
        MergeOptions {
            workers: 1,
            layer_count: None,
        }
    }
}

/// Sibling path of the JSON merge summary written next to the container.
pub fn report_path(out_path: &Path) -> PathBuf {
    let mut name = out_path.file_name().unwrap_or_default().to_os_string();
    name.push(".report.json");
    out_path.with_file_name(name)
}

/// Merge every tensor of the reference index and write the result.
///
/// Tensors are resolved against the config's schedules, merged in f32 with
/// the configured kernel, converted to the output dtype, and written with the
/// index sorted by name. On any failure the partial output is removed.
pub fn merge_checkpoints(
    config: &MergeConfig,
    base: Option<&CheckpointReader>,
    models: &[&CheckpointReader],
    out_path: &Path,
    options: &MergeOptions,
) -> Result<MergeReport, MergeError> {
    let started = Instant::now();
    if config.method.requires_base() && base.is_none() {
        return Err(MergeError::Config(
            crate::config::ConfigError::MissingBaseModel(config.method.as_str()),
        ));
    }
    assert_eq!(
        models.len(),
        config.models.len(),
        "one reader per config model entry"
    );

    let base_specs: Option<Vec<TensorSpec>> = base.map(|r| r.specs().cloned().collect());
    let model_specs: Vec<Vec<TensorSpec>> =
        models.iter().map(|r| r.specs().cloned().collect()).collect();
    let model_spec_refs: Vec<&[TensorSpec]> = model_specs.iter().map(|v| v.as_slice()).collect();
    let report = validate_config(config, base_specs.as_deref(), &model_spec_refs);
    if !report.ok {
        return Err(MergeError::Validation(report));
    }

    let reference = base.unwrap_or(models[0]);
    let layer_count = options
        .layer_count
        .unwrap_or_else(|| infer_layer_count(reference.specs()))
        .max(1);
    let names: Vec<String> = reference.names().map(str::to_string).collect();

    let task = MergeTask {
        config,
        base,
        models,
        layer_count,
    };

    let result = run_and_write(&task, &names, out_path, options.workers.max(1));
    match result {
        Ok(stats) => {
            let report = MergeReport {
                version: 1,
                method: config.method.as_str().to_string(),
                tensors_merged: names.len(),
                out_dtype: config.out_dtype.to_string(),
                wall_time_ms: started.elapsed().as_millis() as u64,
                tensors: stats,
            };
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            std::fs::write(report_path(out_path), json)?;
            Ok(report)
        }
        Err(err) => {
            let _ = std::fs::remove_file(out_path);
            let _ = std::fs::remove_file(report_path(out_path));
            Err(err)
        }
    }
}

struct MergeTask<'a> {
    config: &'a MergeConfig,
    base: Option<&'a CheckpointReader>,
    models: &'a [&'a CheckpointReader],
    layer_count: usize,
}

impl MergeTask<'_> {
    /// Merge a single tensor and convert it to the output dtype.
    fn merge_one(&self, name: &str) -> Result<(Tensor, TensorMergeStats), MergeError> {
        let config = self.config;
        let model_tensors: Vec<Tensor> = self
            .models
            .iter()
            .map(|r| r.read_tensor(name))
            .collect::<Result<_, _>>()?;

        let mut weights = Vec::with_capacity(config.models.len());
        let mut densities = Vec::with_capacity(config.models.len());
        for entry in &config.models {
            weights.push(resolve_parameter(&entry.weight, name, self.layer_count)? as f32);
            densities.push(resolve_parameter(&entry.density, name, self.layer_count)?);
        }

        let (merged, ties_stats) = match config.method {
            MergeMethod::Ties => {
                let base_t = self.base.expect("checked").read_tensor(name)?;
                let (t, s) = ties_merge_detailed(
                    &base_t,
                    &model_tensors,
                    &weights,
                    &densities,
                    config.normalize,
                    config.int8_mask,
                )?;
                (t, Some(s))
            }
            MergeMethod::DareTies => {
                let base_t = self.base.expect("checked").read_tensor(name)?;
                let (t, s) = dare_ties_merge(
                    &base_t,
                    &model_tensors,
                    &weights,
                    &densities,
                    config.seed.unwrap_or(0),
                    config.normalize,
                    config.int8_mask,
                )?;
                (t, Some(s))
            }
            MergeMethod::DareLinear => {
                let base_t = self.base.expect("checked").read_tensor(name)?;
                let (t, s) = dare_linear_merge(
                    &base_t,
                    &model_tensors,
                    &weights,
                    &densities,
                    config.seed.unwrap_or(0),
                    config.normalize,
                )?;
                (t, Some(s))
            }
            MergeMethod::Linear => (
                linear_merge(&model_tensors, &weights, config.normalize)?,
                None,
            ),
            MergeMethod::Slerp => (
                slerp_merge(
                    &model_tensors[0],
                    &model_tensors[1],
                    config.t.expect("validated at parse"),
                )?,
                None,
            ),
        };

        let out = convert_dtype(&merged, config.out_dtype);
        let stats = match ties_stats {
            Some(TiesStats {
                trimmed_fraction,
                sign_conflict_fraction,
            }) => TensorMergeStats {
                name: name.to_string(),
                method: config.method.as_str().to_string(),
                trimmed_fraction,
                sign_conflict_fraction,
            },
            None => TensorMergeStats {
                name: name.to_string(),
                method: config.method.as_str().to_string(),
                trimmed_fraction: Vec::new(),
                sign_conflict_fraction: 0.0,
            },
        };
        Ok((out, stats))
    }
}

/// Merge `names` (already sorted) and stream them to the writer in order.
/// With several workers, tensors are merged concurrently and re-sequenced at
/// the writer, the single ordering point.
fn run_and_write(
    task: &MergeTask<'_>,
    names: &[String],
    out_path: &Path,
    workers: usize,
) -> Result<Vec<TensorMergeStats>, MergeError> {
    let mut writer = CheckpointWriter::create(out_path)?;
    let mut metadata = BTreeMap::new();
    metadata.insert(
        "merge_method".to_string(),
        task.config.method.as_str().to_string(),
    );

    let mut all_stats: Vec<TensorMergeStats> = Vec::with_capacity(names.len());

    if workers <= 1 || names.len() <= 1 {
        for name in names {
            let (tensor, stats) = task.merge_one(name)?;
            writer.add_tensor(&tensor)?;
            all_stats.push(stats);
        }
        writer.finish(Some(&metadata))?;
        return Ok(all_stats);
    }

    type SeqResult = (usize, Result<(Tensor, TensorMergeStats), MergeError>);
    let capacity = workers * 2;
    let (job_tx, job_rx) = crossbeam_channel::bounded::<(usize, String)>(capacity);
    let (result_tx, result_rx) = crossbeam_channel::bounded::<SeqResult>(capacity);

    let outcome = std::thread::scope(|scope| -> Result<(), MergeError> {
        for _ in 0..workers {
            let job_rx = job_rx.clone();
            let result_tx = result_tx.clone();
            scope.spawn(move || {
                while let Ok((seq, name)) = job_rx.recv() {
                    let result = task.merge_one(&name);
                    if result_tx.send((seq, result)).is_err() {
                        break; // writer gave up
                    }
                }
            });
        }
        drop(job_rx);
        drop(result_tx);

        let feeder_names = names.to_vec();
        scope.spawn(move || {
            for (seq, name) in feeder_names.into_iter().enumerate() {
                if job_tx.send((seq, name)).is_err() {
                    break; // all workers stopped consuming
                }
            }
        });

        // single ordering point: re-sequence results and write in name order;
        // takes the receiver by value so an early error drops it, which
        // unblocks the workers and, transitively, the feeder
        let mut drain = |result_rx: crossbeam_channel::Receiver<SeqResult>| -> Result<(), MergeError> {
            let mut pending: BTreeMap<usize, (Tensor, TensorMergeStats)> = BTreeMap::new();
            let mut next = 0usize;
            while next < names.len() {
                let (seq, result) = result_rx
                    .recv()
                    .expect("workers cannot all exit before the last result");
                pending.insert(seq, result?);
                while let Some((tensor, stats)) = pending.remove(&next) {
                    writer.add_tensor(&tensor)?;
                    all_stats.push(stats);
                    next += 1;
                }
            }
            Ok(())
        };
        drain(result_rx)
    });

    outcome?;
    writer.finish(Some(&metadata))?;
    Ok(all_stats)
}
