//! Experiment configuration: JSON-loadable, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::SyntheticSpec;
use crate::encoder::{EncoderSpec, Normalization};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// Dataset directory on disk.
    Path(PathBuf),
    /// Generated in memory from an inline spec.
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderSource {
    /// Seeded random-kernel encoder built at run time.
    Random(EncoderSpec),
    /// Features read from the dataset directory's feature files.
    Precomputed,
}

fn default_gamma_grid() -> Vec<f64> {
    vec![1.0, 10.0, 100.0]
}

fn default_ensemble_size() -> usize {
    1
}

fn default_chunk_size() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub classes_per_task: usize,
    /// Leading tasks reserved for γ selection. 0 means the full stream
    /// doubles as both validation and experiment stream.
    #[serde(default)]
    pub validation_tasks: usize,
    #[serde(default = "default_gamma_grid")]
    pub gamma_grid: Vec<f64>,
    /// Expansion width d_E.
    pub d_e: usize,
    /// Projection σ; `None` means 1/√d_stack.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_e: Option<f64>,
    pub encoder: EncoderSource,
    #[serde(default)]
    pub normalization: Normalization,
    /// Members per run; member i expands with seed run_seed + i.
    #[serde(default = "default_ensemble_size")]
    pub ensemble_size: usize,
    pub run_seeds: Vec<u64>,
    #[serde(default = "default_chunk_size")]
    pub chunk_size: usize,
    /// Row-wise z-scoring of the fused features before expansion.
    #[serde(default)]
    pub standardize_pre_expansion: bool,
    /// Fallback output directory when the CLI gives none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let bytes = std::fs::read(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingFile(path.to_path_buf())
            } else {
                Error::io(path, e)
            }
        })?;
        let config: ExperimentConfig = serde_json::from_slice(&bytes).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes_per_task == 0 {
            return Err(Error::InvalidConfig("classes_per_task must be positive".into()));
        }
        if self.gamma_grid.is_empty() {
            return Err(Error::InvalidConfig("gamma_grid must be non-empty".into()));
        }
        if let Some(&bad) = self
            .gamma_grid
            .iter()
            .find(|g| !g.is_finite() || **g <= 0.0)
        {
            return Err(Error::InvalidConfig(format!(
                "gamma_grid entries must be finite and positive, got {bad}"
            )));
        }
        if self.d_e == 0 {
            return Err(Error::InvalidConfig("d_e must be positive".into()));
        }
        if let Some(sigma) = self.sigma_e {
            if !sigma.is_finite() || sigma <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "sigma_e must be finite and positive, got {sigma}"
                )));
            }
        }
        if self.ensemble_size == 0 {
            return Err(Error::InvalidConfig("ensemble_size must be at least 1".into()));
        }
        if self.run_seeds.is_empty() {
            return Err(Error::InvalidConfig("run_seeds must be non-empty".into()));
        }
        if self.chunk_size == 0 {
            return Err(Error::InvalidConfig("chunk_size must be positive".into()));
        }
        match &self.encoder {
            EncoderSource::Random(spec) => spec.validate()?,
            EncoderSource::Precomputed => {
                if !matches!(self.dataset, DatasetSource::Path(_)) {
                    return Err(Error::InvalidConfig(
                        "precomputed features require a dataset path".into(),
                    ));
                }
                if self.normalization != Normalization::None {
                    return Err(Error::InvalidConfig(
                        "precomputed features skip the encoder, so normalization must be \"none\""
                            .into(),
                    ));
                }
            }
        }
        if let DatasetSource::Synthetic(spec) = &self.dataset {
            spec.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> serde_json::Value {
        serde_json::json!({
            "dataset": {"synthetic": {
                "num_classes": 4,
                "subjects_per_class": 2,
                "train_samples_per_subject": 3,
                "test_samples_per_subject": 2,
                "channels": 2,
                "length": 16,
                "template_seed": 1,
                "subject_scale": 1.0,
                "noise_scale": 0.1,
                "seed": 2
            }},
            "classes_per_task": 2,
            "d_e": 32,
            "encoder": {"random": {
                "blocks": [{"out_channels": 4, "kernel_size": 3, "pool": 2}],
                "seed": 0
            }},
            "run_seeds": [1]
        })
    }

    fn parse(value: serde_json::Value) -> Result<ExperimentConfig> {
        let config: ExperimentConfig =
            serde_json::from_value(value).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let config = parse(minimal_json()).unwrap();
        assert_eq!(config.gamma_grid, vec![1.0, 10.0, 100.0]);
        assert_eq!(config.ensemble_size, 1);
        assert_eq!(config.chunk_size, 256);
        assert_eq!(config.validation_tasks, 0);
        assert_eq!(config.normalization, Normalization::None);
        assert!(!config.standardize_pre_expansion);
        assert!(config.sigma_e.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut value = minimal_json();
        value["surprise"] = serde_json::json!(1);
        assert!(parse(value).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        let mut v = minimal_json();
        v["gamma_grid"] = serde_json::json!([]);
        assert!(parse(v).is_err());

        let mut v = minimal_json();
        v["gamma_grid"] = serde_json::json!([1.0, -2.0]);
        assert!(parse(v).is_err());

        let mut v = minimal_json();
        v["ensemble_size"] = serde_json::json!(0);
        assert!(parse(v).is_err());

        let mut v = minimal_json();
        v["run_seeds"] = serde_json::json!([]);
        assert!(parse(v).is_err());

        let mut v = minimal_json();
        v["d_e"] = serde_json::json!(0);
        assert!(parse(v).is_err());
    }

    #[test]
    fn precomputed_requires_a_path_and_no_normalization() {
        let mut v = minimal_json();
        v["encoder"] = serde_json::json!("precomputed");
        assert!(parse(v).is_err());

        let mut v = minimal_json();
        v["encoder"] = serde_json::json!("precomputed");
        v["dataset"] = serde_json::json!({"path": "/tmp/nowhere"});
        assert!(parse(v.clone()).is_ok());
        v["normalization"] = serde_json::json!("per_sample");
        assert!(parse(v).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let config = parse(minimal_json()).unwrap();
        let text = serde_json::to_string(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn load_reports_missing_and_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        assert!(matches!(
            ExperimentConfig::load(&path),
            Err(Error::MissingFile(_))
        ));
        std::fs::write(&path, b"{oops").unwrap();
        assert!(matches!(
            ExperimentConfig::load(&path),
            Err(Error::Json { .. })
        ));
    }
}
