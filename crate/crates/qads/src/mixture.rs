//! Turns a selection plan into a concrete mixture: per-dataset picks, the
//! merged sample list, and a manifest describing how it was made.

use std::fs;
use std::path::Path;

use qads_core::corpus::{Corpus, Sample};
use qads_core::geometry::{kcenter_greedy, random_seed_pool, seed_pool_size, EmbeddingSet, Metric};
use qads_core::quality::QualityTable;
use qads_core::rng::derive_seed;
use qads_core::selection::{qads_select, quality_vector, random_select, PlanMode, SelectionPlan};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl::write_jsonl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "qads")]
    Qads,
    #[serde(rename = "kcenter")]
    KCenter,
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "keep-all")]
    KeepAll,
}

impl Strategy {
    pub fn keep_all() -> Self {
        Strategy::KeepAll
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Qads => "qads",
            Strategy::KCenter => "kcenter",
            Strategy::Random => "random",
            Strategy::KeepAll => "keep-all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub dataset: String,
    pub strategy: Strategy,
    pub n: usize,
    pub ratio: f64,
    pub budget: usize,
    /// Samples with no quality score, counted as 0 by `qads`.
    pub missing_quality: usize,
    pub picked: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureManifest {
    pub name: String,
    pub config_hash: String,
    pub rng_seed: u64,
    pub provider: String,
    pub total: usize,
    pub entries: Vec<ManifestEntry>,
}

/// Everything a mixture needs besides the corpus and plan.
#[derive(Debug, Clone, Copy)]
pub struct MixtureInputs<'a> {
    pub embeddings: Option<&'a EmbeddingSet>,
    pub quality: Option<&'a QualityTable>,
    pub metric: Metric,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub entries: Vec<ManifestEntry>,
    pub samples: Vec<Sample>,
}

impl Mixture {
    pub fn manifest(&self, name: &str, config_hash: &str, rng_seed: u64, provider: &str) -> MixtureManifest {
        MixtureManifest {
            name: name.to_string(),
            config_hash: config_hash.to_string(),
            rng_seed,
            provider: provider.to_string(),
            total: self.samples.len(),
            entries: self.entries.clone(),
        }
    }
}

/// Runs each plan entry with its dataset's strategy. Samples come out in plan
/// order, and within a dataset in selection order (file order for keep-all).
pub fn assemble_mixture(
    corpus: &Corpus,
    plan: &SelectionPlan,
    strategy_of: impl Fn(&str) -> Strategy,
    inputs: MixtureInputs<'_>,
) -> Result<Mixture> {
    plan.validate()?;
    let mut entries = Vec::with_capacity(plan.entries.len());
    let mut samples = Vec::new();
    for entry in &plan.entries {
        let data = corpus
            .dataset(&entry.dataset)
            .ok_or_else(|| qads_core::Error::UnknownId(format!("dataset {}", entry.dataset)))?;
        if data.len() != entry.n {
            return Err(qads_core::Error::InvalidArgument(format!(
                "plan expects {} samples in {:?}, corpus has {}",
                entry.n,
                entry.dataset,
                data.len()
            ))
            .into());
        }
        let strategy = if entry.mode == PlanMode::KeepAll {
            Strategy::KeepAll
        } else {
            strategy_of(&entry.dataset)
        };
        let seed = derive_seed(inputs.rng_seed, &format!("select:{}", entry.dataset));
        let mut missing = 0;
        let picks: Vec<usize> = match strategy {
            Strategy::KeepAll => (0..data.len()).collect(),
            Strategy::Random => random_select(data.len(), entry.budget, seed)?,
            Strategy::KCenter | Strategy::Qads => {
                let emb = inputs
                    .embeddings
                    .ok_or_else(|| qads_core::Error::MissingEmbeddings(entry.dataset.clone()))?;
                let local = emb
                    .subset(data.iter().map(|s| s.id.as_str()))?
                    .for_metric(inputs.metric);
                let pool = random_seed_pool(data.len(), seed_pool_size(data.len(), entry.budget), seed);
                if strategy == Strategy::KCenter {
                    kcenter_greedy(&local, &pool, entry.budget, seed)?
                } else {
                    let table = inputs.quality.ok_or_else(|| {
                        qads_core::Error::InvalidArgument(format!(
                            "dataset {:?} uses qads but no quality scores are available",
                            entry.dataset
                        ))
                    })?;
                    let (q, m) = quality_vector(&local, table);
                    missing = m;
                    qads_select(&local, &q, &pool, entry.budget, seed)?
                }
            }
        };
        let picked: Vec<String> = picks.iter().map(|&i| data[i].id.clone()).collect();
        samples.extend(picks.iter().map(|&i| data[i].clone()));
        entries.push(ManifestEntry {
            dataset: entry.dataset.clone(),
            strategy,
            n: entry.n,
            ratio: entry.ratio,
            budget: picks.len(),
            missing_quality: missing,
            picked,
        });
    }
    Ok(Mixture { entries, samples })
}

/// Writes `mixture.jsonl` and `manifest.json` into `dir`.
pub fn write_mixture(mixture: &Mixture, manifest: &MixtureManifest, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    write_jsonl(&mixture.samples, dir.join("mixture.jsonl"))?;
    write_json(manifest, dir.join("manifest.json"))
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(Error::json(path))?;
    text.push('\n');
    fs::write(path, text).map_err(Error::io(path))
}
