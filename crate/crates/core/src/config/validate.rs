use serde::Serialize;

use super::MergeConfig;
use crate::checkpoint::TensorSpec;

/// One structural or informational finding from pre-merge validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum ValidationIssue {
    /// Present in the reference set, absent from a model. Structural.
    MissingTensor { name: String, model_index: usize },
    /// Same name, different shape. Structural.
    ShapeMismatch {
        name: String,
        model_index: usize,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    /// Same name, different stored dtype. Informational only: merging works
    /// in f32 regardless.
    DtypeNote {
        name: String,
        model_index: usize,
        reference: String,
        found: String,
    },
}

impl ValidationIssue {
    pub fn is_structural(&self) -> bool {
        !matches!(self, ValidationIssue::DtypeNote { .. })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<ValidationIssue>,
}

/// Check model spec sets against the merge's reference set: the base for
/// methods that use one, otherwise the first model. `model_index` in issues
/// counts models in config order.
pub fn validate_config(
    config: &MergeConfig,
    base_specs: Option<&[TensorSpec]>,
    model_specs: &[&[TensorSpec]],
) -> ValidationReport {
    let mut issues = Vec::new();

    let reference: &[TensorSpec] = match base_specs {
        Some(specs) => specs,
        None => model_specs.first().copied().unwrap_or(&[]),
    };
    debug_assert_eq!(config.models.len(), model_specs.len());

    for (model_index, specs) in model_specs.iter().enumerate() {
        if base_specs.is_none() && model_index == 0 {
            continue; // the reference itself
        }
        for ref_spec in reference {
            match specs.iter().find(|s| s.name == ref_spec.name) {
                None => issues.push(ValidationIssue::MissingTensor {
                    name: ref_spec.name.clone(),
                    model_index,
                }),
                Some(found) => {
                    if found.shape != ref_spec.shape {
                        issues.push(ValidationIssue::ShapeMismatch {
                            name: ref_spec.name.clone(),
                            model_index,
                            expected: ref_spec.shape.clone(),
                            found: found.shape.clone(),
                        });
                    } else if found.dtype != ref_spec.dtype {
                        issues.push(ValidationIssue::DtypeNote {
                            name: ref_spec.name.clone(),
                            model_index,
                            reference: ref_spec.dtype.to_string(),
                            found: found.dtype.to_string(),
                        });
                    }
                }
            }
        }
    }

    let ok = issues.iter().all(|i| !i.is_structural());
    ValidationReport { ok, issues }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkpoint::DType;
    use crate::config::parse_config;

    fn spec(name: &str, dtype: DType, shape: Vec<usize>) -> TensorSpec {
        let bytes = shape.iter().product::<usize>() * dtype.element_size();
        TensorSpec {
            name: name.to_string(),
            dtype,
            shape,
            data_offsets: (0, bytes as u64),
        }
    }

    fn ties_config() -> MergeConfig {
        parse_config("merge_method: ties\nbase_model: base\nmodels:\n  - model: a\n").unwrap()
    }

    #[test]
    fn identical_sets_are_ok() {
        let config = ties_config();
        let specs = vec![
            spec("model.norm.weight", DType::F32, vec![4]),
            spec("model.layers.0.mlp.w", DType::F32, vec![4, 4]),
        ];
        let report = validate_config(&config, Some(&specs), &[&specs]);
        assert!(report.ok);
        assert!(report.issues.is_empty());
    }

    #[test]
    fn missing_tensor_is_reported_with_model_index() {
        let config = ties_config();
        let base = vec![
            spec("model.norm.weight", DType::F32, vec![4]),
            spec("model.layers.0.mlp.w", DType::F32, vec![4, 4]),
        ];
        let model = vec![spec("model.layers.0.mlp.w", DType::F32, vec![4, 4])];
        let report = validate_config(&config, Some(&base), &[&model]);
        assert!(!report.ok);
        assert_eq!(
            report.issues,
            vec![ValidationIssue::MissingTensor {
                name: "model.norm.weight".into(),
                model_index: 0,
            }]
        );
    }

    #[test]
    fn shape_mismatch_is_structural() {
        let config = ties_config();
        let base = vec![spec("w", DType::F32, vec![4, 4])];
        let model = vec![spec("w", DType::F32, vec![4, 8])];
        let report = validate_config(&config, Some(&base), &[&model]);
        assert!(!report.ok);
        assert!(matches!(
            &report.issues[0],
            ValidationIssue::ShapeMismatch { found, .. } if *found == vec![4, 8]
        ));
    }

    #[test]
    fn dtype_difference_is_a_note_not_a_failure() {
        let config = ties_config();
        let base = vec![spec("w", DType::F32, vec![2])];
        let model = vec![spec("w", DType::BF16, vec![2])];
        let report = validate_config(&config, Some(&base), &[&model]);
        assert!(report.ok);
        assert_eq!(report.issues.len(), 1);
        assert!(!report.issues[0].is_structural());
    }

    #[test]
    fn first_model_is_reference_when_no_base() {
        let config =
            parse_config("merge_method: linear\nmodels:\n  - model: a\n  - model: b\n").unwrap();
        let a = vec![spec("w", DType::F32, vec![2])];
        let b: Vec<TensorSpec> = vec![];
        let report = validate_config(&config, None, &[&a, &b]);
        assert!(!report.ok);
        assert_eq!(
            report.issues,
            vec![ValidationIssue::MissingTensor {
                name: "w".into(),
                model_index: 1,
            }]
        );
    }
}
