//! The end-to-end `mix` run and its cached stages.
//!
//! Every artifact is written next to a `<file>.meta.json` sidecar. A stage
//! is skipped when its sidecar carries the same stage key and the artifact
//! still hashes to the recorded digest.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use qads_core::corpus::Corpus;
use qads_core::geometry::EmbeddingSet;
use qads_core::provider::LanguageModel;
use qads_core::quality::QualityTable;
use qads_core::selection::{balanced_ratios, quality_ratios, DatasetQuality, PlanEntry, SelectionPlan};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{LoadedConfig, PipelineConfig, RatioScheme};
use crate::embfile::{load_embeddings, save_embeddings};
use crate::error::{Error, Result};
use crate::jsonl::{load_corpus, load_quality, write_quality};
use crate::mixture::{assemble_mixture, write_json, write_mixture, MixtureInputs, MixtureManifest, Strategy};
use crate::scoring::{build_prompt_and_test_sets, embed_corpus, score_corpus};

pub const EMBEDDINGS_FILE: &str = "embeddings.qemb";
pub const QUALITY_FILE: &str = "quality.jsonl";
pub const PLAN_FILE: &str = "plan.json";
pub const MIXTURE_FILE: &str = "mixture.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance sidecar written next to every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub command: String,
    pub config_hash: String,
    pub stage_key: String,
    pub seed: Option<u64>,
    pub provider: String,
    /// SHA-256 of the artifact bytes.
    pub sha256: String,
}

pub fn meta_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    artifact.with_file_name(name)
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn write_meta(artifact: &Path, meta: &ArtifactMeta) -> Result<()> {
    write_json(meta, meta_path(artifact))
}

pub fn read_meta(artifact: &Path) -> Option<ArtifactMeta> {
    let text = fs::read_to_string(meta_path(artifact)).ok()?;
    serde_json::from_str(&text).ok()
}

/// True when `artifact` exists, its sidecar records `stage_key`, and the
/// bytes still match the recorded digest.
pub fn is_fresh(artifact: &Path, stage_key: &str) -> bool {
    match read_meta(artifact) {
        Some(meta) => meta.stage_key == stage_key && file_sha256(artifact).is_ok_and(|h| h == meta.sha256),
        None => false,
    }
}

/// Hashes `artifact` and writes its sidecar.
pub fn finish_artifact(
    artifact: &Path,
    command: &str,
    config_hash: &str,
    stage_key: &str,
    seed: Option<u64>,
    provider: &str,
) -> Result<()> {
    let meta = ArtifactMeta {
        command: command.to_string(),
        config_hash: config_hash.to_string(),
        stage_key: stage_key.to_string(),
        seed,
        provider: provider.to_string(),
        sha256: file_sha256(artifact)?,
    };
    write_meta(artifact, &meta)
}

/// Hex SHA-256 of the JSON form of `value`.
pub fn key_of<T: Serialize>(value: &T) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(value).expect("key serializes")))
}

/// Config with its seed resolved, plus where outputs go.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub loaded: LoadedConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub command: String,
}

impl RunContext {
    /// `seed` and `out_dir` override the config values when given.
    pub fn new(mut loaded: LoadedConfig, seed: Option<u64>, out_dir: Option<PathBuf>, command: &str) -> Result<Self> {
        if seed.is_some() {
            loaded.config.seed = seed;
        }
        loaded.config.validate(&loaded.base_dir)?;
        let seed = loaded.config.seed()?;
        let out_dir = out_dir.unwrap_or_else(|| loaded.resolve(&loaded.config.output_dir));
        Ok(RunContext {
            loaded,
            seed,
            out_dir,
            command: command.to_string(),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.loaded.config
    }

    fn finish(&self, artifact: &Path, stage_key: &str, provider: &str) -> Result<()> {
        finish_artifact(
            artifact,
            &self.command,
            &self.config().hash(),
            stage_key,
            Some(self.seed),
            provider,
        )
    }
}

/// What a `mix` run produced.
#[derive(Debug, Clone)]
pub struct MixOutcome {
    pub manifest: MixtureManifest,
    pub plan: SelectionPlan,
    pub out_dir: PathBuf,
    pub embeddings_cached: bool,
    pub quality_cached: bool,
}

/// Datasets that need embeddings: those selected geometrically, plus the
/// quality test sets when quality scores are used.
pub fn datasets_to_embed(config: &PipelineConfig) -> Vec<String> {
    let mut out: BTreeSet<String> = config
        .datasets
        .iter()
        .filter(|d| matches!(d.strategy, Strategy::Qads | Strategy::KCenter))
        .map(|d| d.name.clone())
        .collect();
    if config.uses_quality() {
        out.extend(config.quality.test_datasets.iter().cloned());
    }
    out.into_iter().collect()
}

/// Content digests of the named input files.
pub fn input_digests(inputs: &[(String, PathBuf)], names: &[String]) -> Result<BTreeMap<String, String>> {
    inputs
        .iter()
        .filter(|(n, _)| names.contains(n))
        .map(|(n, p)| Ok((n.clone(), file_sha256(p)?)))
        .collect()
}

pub fn run_mix(ctx: &RunContext) -> Result<MixOutcome> {
    let config = ctx.config();
    let corpus = load_corpus(&ctx.loaded.dataset_inputs())?;
    fs::create_dir_all(&ctx.out_dir).map_err(Error::io(&ctx.out_dir))?;

    let model = if config.needs_provider() || config.uses_quality() {
        Some(config.provider.build()?)
    } else {
        None
    };
    let provider_id = model
        .as_ref()
        .map(|m| m.identity())
        .unwrap_or_else(|| "none".to_string());
    let parallelism = config.provider.parallelism;

    let embed_names = datasets_to_embed(config);
    let mut embeddings = None;
    let mut embeddings_cached = false;
    let mut embed_key = String::new();
    if let Some(model) = &model {
        if !embed_names.is_empty() {
            embed_key = key_of(&(
                "embed",
                &provider_id,
                config.embedding.question_only,
                input_digests(&ctx.loaded.dataset_inputs(), &embed_names)?,
            ));
            let path = ctx.out_dir.join(EMBEDDINGS_FILE);
            embeddings_cached = is_fresh(&path, &embed_key);
            let emb = if embeddings_cached {
                load_embeddings(&path)?
            } else {
                let emb = embed_corpus(
                    &corpus,
                    Some(&embed_names),
                    model,
                    parallelism,
                    config.embedding.question_only,
                )?;
                save_embeddings(&emb, &path)?;
                ctx.finish(&path, &embed_key, &provider_id)?;
                emb
            };
            embeddings = Some(emb);
        }
    }

    let mut quality = None;
    let mut quality_cached = false;
    if let (Some(model), true) = (&model, config.uses_quality()) {
        let emb = embeddings.as_ref().expect("test datasets are embedded");
        let prompt_names = config.prompt_datasets();
        let mut all: Vec<String> = prompt_names.clone();
        all.extend(config.quality.test_datasets.iter().cloned());
        let key = key_of(&(
            "qscore",
            &provider_id,
            ctx.seed,
            config.quality.n1,
            config.quality.n2,
            &prompt_names,
            &config.quality.test_datasets,
            &embed_key,
            input_digests(&ctx.loaded.dataset_inputs(), &all)?,
        ));
        let path = ctx.out_dir.join(QUALITY_FILE);
        quality_cached = is_fresh(&path, &key);
        let table = if quality_cached {
            load_quality(&path)?
        } else {
            let table = run_quality(&corpus, emb, config, ctx.seed, model)?;
            write_quality(&table, &path)?;
            ctx.finish(&path, &key, &provider_id)?;
            table
        };
        quality = Some(table);
    }

    let plan = resolve_plan(config, &corpus, quality.as_ref())?;
    let plan_path = ctx.out_dir.join(PLAN_FILE);
    write_json(&plan, &plan_path)?;
    ctx.finish(&plan_path, &key_of(&("plan", &plan)), &provider_id)?;

    let strategies: BTreeMap<&str, Strategy> = config.datasets.iter().map(|d| (d.name.as_str(), d.strategy)).collect();
    let mixture = assemble_mixture(
        &corpus,
        &plan,
        |name| strategies[name],
        MixtureInputs {
            embeddings: embeddings.as_ref(),
            quality: quality.as_ref(),
            metric: config.embedding.metric,
            rng_seed: ctx.seed,
        },
    )?;
    let manifest = mixture.manifest(&config.name, &config.hash(), ctx.seed, &provider_id);
    write_mixture(&mixture, &manifest, &ctx.out_dir)?;
    let mix_path = ctx.out_dir.join(MIXTURE_FILE);
    ctx.finish(&mix_path, &key_of(&("mix", &manifest)), &provider_id)?;

    Ok(MixOutcome {
        manifest,
        plan,
        out_dir: ctx.out_dir.clone(),
        embeddings_cached,
        quality_cached,
    })
}

/// Chooses test and prompt samples and scores every prompt.
pub fn run_quality<M>(
    corpus: &Corpus,
    embeddings: &EmbeddingSet,
    config: &PipelineConfig,
    seed: u64,
    model: &M,
) -> Result<QualityTable>
where
    M: LanguageModel + Sync + ?Sized,
{
    let p = config.provider.parallelism;
    let (prompts, tests) = build_prompt_and_test_sets(
        corpus,
        &config.prompt_datasets(),
        &config.quality.test_datasets,
        embeddings,
        config.quality.n1,
        config.quality.n2,
        seed,
        model,
        p,
    )?;
    score_corpus(&prompts, &tests, model, p)
}

/// Mean 1-5 label of the scored samples in `dataset`.
pub fn average_label(corpus: &Corpus, dataset: &str, quality: &QualityTable) -> Option<f64> {
    let labels: Vec<f64> = corpus
        .dataset(dataset)?
        .iter()
        .filter_map(|s| quality.label(&s.id))
        .map(f64::from)
        .collect();
    if labels.is_empty() {
        None
    } else {
        Some(labels.iter().sum::<f64>() / labels.len() as f64)
    }
}

/// Plan in config dataset order. Datasets using the keep-all strategy are
/// always kept whole.
pub fn resolve_plan(config: &PipelineConfig, corpus: &Corpus, quality: Option<&QualityTable>) -> Result<SelectionPlan> {
    let size = |name: &str| -> Result<usize> {
        corpus
            .dataset(name)
            .map(<[_]>::len)
            .ok_or_else(|| qads_core::Error::UnknownId(format!("dataset {name}")).into())
    };
    let computed: Option<SelectionPlan> = match config.ratios {
        RatioScheme::Explicit => None,
        RatioScheme::Balanced { low, upp } => Some(balanced_ratios(&corpus.sizes(), low, upp)?),
        RatioScheme::Quality { qs_max } => {
            let table = quality
                .ok_or_else(|| qads_core::Error::InvalidArgument("quality ratios need quality scores".to_string()))?;
            let mut rows = Vec::new();
            for d in config.datasets.iter().filter(|d| d.strategy != Strategy::KeepAll) {
                let qs_avg = average_label(corpus, &d.name, table).ok_or_else(|| {
                    qads_core::Error::InvalidArgument(format!("no quality scores for dataset {:?}", d.name))
                })?;
                rows.push(DatasetQuality {
                    dataset: d.name.clone(),
                    n: size(&d.name)?,
                    qs_avg,
                });
            }
            Some(quality_ratios(&rows, qs_max)?)
        }
    };
    let mut entries = Vec::with_capacity(config.datasets.len());
    for d in &config.datasets {
        let n = size(&d.name)?;
        let entry = if d.strategy == Strategy::KeepAll {
            PlanEntry::keep_all(d.name.clone(), n)
        } else if let Some(plan) = &computed {
            plan.get(&d.name).cloned().expect("computed plan covers every dataset")
        } else {
            let ratio = d.ratio.ok_or_else(|| {
                Error::Config(vec![format!(
                    "datasets.{}.ratio is required with explicit ratios",
                    d.name
                )])
            })?;
            PlanEntry::with_ratio(d.name.clone(), n, ratio)?
        };
        entries.push(entry);
    }
    let plan = SelectionPlan { entries };
    plan.validate()?;
    Ok(plan)
}
