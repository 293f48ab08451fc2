//! Pipeline configuration: one JSON file, with only provider credentials
//! overridable from the environment.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use qads_core::geometry::Metric;
use qads_core::quality::{DEFAULT_N1, DEFAULT_N2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mixture::Strategy;
use crate::provider::ProviderSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSettings {
    #[serde(default)]
    pub question_only: bool,
    #[serde(default)]
    pub metric: Metric,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        EmbeddingSettings {
            question_only: false,
            metric: Metric::Euclidean,
        }
    }
}

fn default_n1() -> usize {
    DEFAULT_N1
}

fn default_n2() -> usize {
    DEFAULT_N2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualitySettings {
    #[serde(default = "default_n1")]
    pub n1: usize,
    #[serde(default = "default_n2")]
    pub n2: usize,
    /// Datasets whose samples are scored. Defaults to every dataset using
    /// the `qads` strategy.
    #[serde(default)]
    pub prompt_datasets: Option<Vec<String>>,
    #[serde(default)]
    pub test_datasets: Vec<String>,
}

impl Default for QualitySettings {
    fn default() -> Self {
        QualitySettings {
            n1: DEFAULT_N1,
            n2: DEFAULT_N2,
            prompt_datasets: None,
            test_datasets: Vec::new(),
        }
    }
}

fn default_qs_max() -> f64 {
    5.0
}

/// How per-dataset ratios are decided.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum RatioScheme {
    /// Each dataset carries its own `ratio`.
    #[default]
    Explicit,
    Balanced {
        low: usize,
        upp: usize,
    },
    Quality {
        #[serde(default = "default_qs_max")]
        qs_max: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    pub path: PathBuf,
    #[serde(default = "Strategy::keep_all")]
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

fn default_name() -> String {
    "qads".to_string()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub provider: ProviderSettings,
    #[serde(default)]
    pub embedding: EmbeddingSettings,
    #[serde(default)]
    pub quality: QualitySettings,
    #[serde(default)]
    pub ratios: RatioScheme,
    #[serde(default)]
    pub datasets: Vec<DatasetSpec>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            name: default_name(),
            seed: None,
            provider: ProviderSettings::default(),
            embedding: EmbeddingSettings::default(),
            quality: QualitySettings::default(),
            ratios: RatioScheme::default(),
            datasets: Vec::new(),
            output_dir: default_output_dir(),
        }
    }
}

/// A parsed config plus the directory its relative paths are resolved from.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    /// Reads a config file and applies the provider environment overrides.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        let mut config: PipelineConfig = serde_json::from_str(&text).map_err(Error::json(path))?;
        config.provider.apply_env();
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(LoadedConfig { config, base_dir })
    }

    /// No file: defaults plus environment overrides, paths relative to the
    /// working directory.
    pub fn from_env() -> Self {
        let mut config = PipelineConfig::default();
        config.provider.apply_env();
        LoadedConfig {
            config,
            base_dir: PathBuf::new(),
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn dataset_inputs(&self) -> Vec<(String, PathBuf)> {
        self.config
            .datasets
            .iter()
            .map(|d| (d.name.clone(), self.resolve(&d.path)))
            .collect()
    }
}

impl PipelineConfig {
    pub fn needs_provider(&self) -> bool {
        self.datasets
            .iter()
            .any(|d| matches!(d.strategy, Strategy::Qads | Strategy::KCenter))
    }

    pub fn uses_quality(&self) -> bool {
        self.datasets.iter().any(|d| d.strategy == Strategy::Qads) || matches!(self.ratios, RatioScheme::Quality { .. })
    }

    /// Datasets whose samples receive quality scores.
    pub fn prompt_datasets(&self) -> Vec<String> {
        match &self.quality.prompt_datasets {
            Some(p) => p.clone(),
            None => self
                .datasets
                .iter()
                .filter(|d| {
                    d.strategy == Strategy::Qads
                        || (d.strategy != Strategy::KeepAll && matches!(self.ratios, RatioScheme::Quality { .. }))
                })
                .map(|d| d.name.clone())
                .collect(),
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config(vec!["seed is required (config \"seed\" or --seed)".to_string()]))
    }

    /// Problems that block a full `mix` run, all at once.
    pub fn problems(&self, base_dir: &Path) -> Vec<String> {
        let mut out = Vec::new();
        if self.name.is_empty() {
            out.push("name must not be empty".to_string());
        }
        if self.seed.is_none() {
            out.push("seed is required (config \"seed\" or --seed)".to_string());
        }
        if self.datasets.is_empty() {
            out.push("datasets must not be empty".to_string());
        }
        let mut names = BTreeSet::new();
        for d in &self.datasets {
            if !names.insert(d.name.as_str()) {
                out.push(format!("dataset {:?} listed twice", d.name));
            }
            let p = if d.path.is_absolute() {
                d.path.clone()
            } else {
                base_dir.join(&d.path)
            };
            if !p.is_file() {
                out.push(format!("datasets.{}.path {} does not exist", d.name, p.display()));
            }
            match (&self.ratios, d.ratio, d.strategy) {
                (_, _, Strategy::KeepAll) => {}
                (RatioScheme::Explicit, None, _) => {
                    out.push(format!("datasets.{}.ratio is required with explicit ratios", d.name))
                }
                (RatioScheme::Explicit, Some(r), _) if !(r > 0.0 && r <= 1.0) => {
                    out.push(format!("datasets.{}.ratio {r} outside (0, 1]", d.name))
                }
                (RatioScheme::Balanced { .. } | RatioScheme::Quality { .. }, Some(_), _) => {
                    out.push(format!("datasets.{}.ratio conflicts with computed ratios", d.name))
                }
                _ => {}
            }
        }
        match self.ratios {
            RatioScheme::Balanced { low, upp } if low >= upp => {
                out.push(format!("ratios.low {low} must be below ratios.upp {upp}"))
            }
            RatioScheme::Quality { qs_max } if !(qs_max > 0.0 && qs_max.is_finite()) => {
                out.push(format!("ratios.qs_max {qs_max} must be positive"))
            }
            _ => {}
        }
        if self.uses_quality() {
            if self.quality.n1 == 0 {
                out.push("quality.n1 must be >= 1".to_string());
            }
            if self.quality.n2 == 0 {
                out.push("quality.n2 must be >= 1".to_string());
            }
            if self.quality.test_datasets.is_empty() {
                out.push("quality.test_datasets must not be empty when quality scores are used".to_string());
            }
            for t in self.quality.test_datasets.iter().chain(self.prompt_datasets().iter()) {
                if !names.contains(t.as_str()) {
                    out.push(format!("quality dataset {t:?} is not in datasets"));
                }
            }
        }
        if self.needs_provider() || self.uses_quality() {
            out.extend(self.provider.problems());
        }
        out
    }

    pub fn validate(&self, base_dir: &Path) -> Result<()> {
        let problems = self.problems(base_dir);
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    /// SHA-256 of the canonical JSON form. Credentials are not serialized
    /// and so never affect the hash.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
