use serde::Deserialize;

use super::{
    ConfigError, MergeConfig, MergeMethod, ModelEntry, ParameterSchedule, ScheduleRule,
};
use crate::checkpoint::DType;

// Raw document shape. Unknown keys are rejected everywhere: a typo in a merge
// recipe silently changing the result is worse than a hard error.

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    merge_method: String,
    #[serde(default)]
    base_model: Option<String>,
    models: Vec<RawModelEntry>,
    #[serde(default)]
    parameters: Option<RawGlobalParams>,
    #[serde(default)]
    dtype: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModelEntry {
    model: String,
    #[serde(default)]
    parameters: Option<RawModelParams>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModelParams {
    #[serde(default)]
    weight: Option<RawSchedule>,
    #[serde(default)]
    density: Option<RawSchedule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGlobalParams {
    #[serde(default)]
    normalize: Option<bool>,
    #[serde(default)]
    int8_mask: Option<bool>,
    #[serde(default)]
    t: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
}

/// A parameter is a scalar, a bare anchor list, or filtered rules.
#[derive(Deserialize)]
#[serde(untagged)]
enum RawSchedule {
    Scalar(f64),
    Anchors(Vec<f64>),
    Rules(Vec<RawRule>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    #[serde(default)]
    filter: Option<String>,
    value: RawValue,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawValue {
    Scalar(f64),
    Anchors(Vec<f64>),
}

impl RawSchedule {
    fn into_schedule(self) -> Result<ParameterSchedule, ConfigError> {
        let rules = match self {
            RawSchedule::Scalar(v) => return Ok(ParameterSchedule::constant(v)),
            RawSchedule::Anchors(anchors) => vec![ScheduleRule {
                filter: None,
                anchors,
            }],
            RawSchedule::Rules(raw) => raw
                .into_iter()
                .map(|r| ScheduleRule {
                    filter: r.filter,
                    anchors: match r.value {
                        RawValue::Scalar(v) => vec![v],
                        RawValue::Anchors(a) => a,
                    },
                })
                .collect(),
        };
        Ok(ParameterSchedule { rules })
    }
}

fn check_schedule(
    schedule: &ParameterSchedule,
    what: &str,
    model: &str,
    density: bool,
) -> Result<(), ConfigError> {
    let mut seen_default = false;
    for rule in &schedule.rules {
        if rule.anchors.is_empty() {
            return Err(ConfigError::Schema(format!(
                "{what} of model {model:?}: anchor list must be non-empty"
            )));
        }
        if rule.filter.is_none() {
            if seen_default {
                return Err(ConfigError::Schema(format!(
                    "{what} of model {model:?}: more than one rule without a filter"
                )));
            }
            seen_default = true;
        }
        for &a in &rule.anchors {
            if !a.is_finite() {
                return Err(ConfigError::Schema(format!(
                    "{what} of model {model:?}: anchors must be finite"
                )));
            }
            if density && !(a > 0.0 && a <= 1.0) {
                return Err(ConfigError::Schema(format!(
                    "{what} of model {model:?}: density values must lie in (0, 1], got {a}"
                )));
            }
        }
    }
    Ok(())
}

fn parse_out_dtype(s: &str) -> Result<DType, ConfigError> {
    match s {
        "bfloat16" => Ok(DType::BF16),
        "float16" => Ok(DType::F16),
        "float32" => Ok(DType::F32),
        other => Err(ConfigError::Schema(format!(
            "unknown dtype {other:?} (expected bfloat16, float16, or float32)"
        ))),
    }
}

fn dtype_config_spelling(d: DType) -> &'static str {
    match d {
        DType::BF16 => "bfloat16",
        DType::F16 => "float16",
        DType::F32 => "float32",
    }
}

/// Parse and validate a merge recipe document.
pub fn parse_config(text: &str) -> Result<MergeConfig, ConfigError> {
    // two-stage parse separates syntax errors from schema errors
    let value: serde_yaml::Value =
        serde_yaml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let raw: RawConfig =
        serde_yaml::from_value(value).map_err(|e| ConfigError::Schema(e.to_string()))?;

    let method = match raw.merge_method.as_str() {
        "ties" => MergeMethod::Ties,
        "linear" => MergeMethod::Linear,
        "slerp" => MergeMethod::Slerp,
        "dare_ties" => MergeMethod::DareTies,
        "dare_linear" => MergeMethod::DareLinear,
        other => return Err(ConfigError::UnknownMethod(other.to_string())),
    };

    if method.requires_base() && raw.base_model.is_none() {
        return Err(ConfigError::MissingBaseModel(method.as_str()));
    }

    if raw.models.is_empty() {
        return Err(ConfigError::Schema("models list must be non-empty".into()));
    }

    let mut models = Vec::with_capacity(raw.models.len());
    for entry in raw.models {
        if let Some(base) = &raw.base_model {
            if method.requires_base() && base == &entry.model {
                return Err(ConfigError::Schema(format!(
                    "base_model {base:?} must be distinct from every models entry for {method}",
                    method = method.as_str()
                )));
            }
        }
        let params = entry.parameters;
        let (weight, density) = match params {
            Some(p) => (
                p.weight
                    .map(RawSchedule::into_schedule)
                    .transpose()?
                    .unwrap_or_else(|| ParameterSchedule::constant(1.0)),
                p.density
                    .map(RawSchedule::into_schedule)
                    .transpose()?
                    .unwrap_or_else(|| ParameterSchedule::constant(1.0)),
            ),
            None => (
                ParameterSchedule::constant(1.0),
                ParameterSchedule::constant(1.0),
            ),
        };
        check_schedule(&weight, "weight", &entry.model, false)?;
        check_schedule(&density, "density", &entry.model, true)?;
        models.push(ModelEntry {
            model: entry.model,
            weight,
            density,
        });
    }

    let globals = raw.parameters;
    let normalize = globals.as_ref().and_then(|g| g.normalize).unwrap_or(false);
    let int8_mask = globals.as_ref().and_then(|g| g.int8_mask).unwrap_or(false);
    let t = globals.as_ref().and_then(|g| g.t);
    let seed = globals.as_ref().and_then(|g| g.seed);

    if method == MergeMethod::Slerp {
        if models.len() != 2 {
            return Err(ConfigError::Schema(format!(
                "slerp requires exactly 2 models, got {}",
                models.len()
            )));
        }
        match t {
            Some(t) if (0.0..=1.0).contains(&t) => {}
            Some(t) => {
                return Err(ConfigError::Schema(format!(
                    "slerp t must lie in [0, 1], got {t}"
                )))
            }
            None => {
                return Err(ConfigError::Schema(
                    "slerp requires parameters.t".to_string(),
                ))
            }
        }
    }

    let out_dtype = match raw.dtype {
        Some(s) => parse_out_dtype(&s)?,
        None => DType::F32,
    };

    Ok(MergeConfig {
        method,
        base_model: raw.base_model,
        models,
        normalize,
        int8_mask,
        out_dtype,
        t,
        seed,
    })
}

/// Serialize a config back to the document surface syntax. Parsing the result
/// yields a semantically equal config; scalar parameters come back as
/// single-anchor schedules either way.
pub fn to_yaml(config: &MergeConfig) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    writeln!(out, "merge_method: {}", config.method.as_str()).unwrap();
    if let Some(base) = &config.base_model {
        writeln!(out, "base_model: {base}").unwrap();
    }
    writeln!(out, "models:").unwrap();
    for entry in &config.models {
        writeln!(out, "  - model: {}", entry.model).unwrap();
        writeln!(out, "    parameters:").unwrap();
        write_schedule(&mut out, "weight", &entry.weight);
        write_schedule(&mut out, "density", &entry.density);
    }
    writeln!(out, "parameters:").unwrap();
    writeln!(out, "  normalize: {}", config.normalize).unwrap();
    writeln!(out, "  int8_mask: {}", config.int8_mask).unwrap();
    if let Some(t) = config.t {
        writeln!(out, "  t: {t}").unwrap();
    }
    if let Some(seed) = config.seed {
        writeln!(out, "  seed: {seed}").unwrap();
    }
    writeln!(out, "dtype: {}", dtype_config_spelling(config.out_dtype)).unwrap();
    out
}

fn write_schedule(out: &mut String, key: &str, schedule: &ParameterSchedule) {
    use std::fmt::Write;
    writeln!(out, "      {key}:").unwrap();
    for rule in &schedule.rules {
        let anchors = rule
            .anchors
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        match &rule.filter {
            Some(f) => {
                writeln!(out, "        - filter: {f}").unwrap();
                writeln!(out, "          value: [{anchors}]").unwrap();
            }
            None => writeln!(out, "        - value: [{anchors}]").unwrap(),
        }
    }
}
