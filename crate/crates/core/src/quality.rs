//! One-shot quality scores.
//!
//! A test sample's zero-shot score is the mean answer-token log-probability
//! given its question. A prompt sample's one-shot score on that test sample
//! is the same quantity with the prompt's question and answer prepended. The
//! quality score of a prompt is the fraction of test samples whose one-shot
//! score strictly beats their zero-shot score, averaged over test sets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::analysis::discretize;
use crate::corpus::{Corpus, Sample};
use crate::error::{Error, Result};
use crate::geometry::{kcenter_greedy, EmbeddingSet};
use crate::provider::{LanguageModel, LogProbRequest, ProviderError};
use crate::rng;

/// Recommended number of prompt candidates per dataset.
pub const DEFAULT_N1: usize = 2000;
/// Recommended number of test samples per test set.
pub const DEFAULT_N2: usize = 100;

pub fn zero_shot_request(test: &Sample) -> Result<LogProbRequest, ProviderError> {
    LogProbRequest::new(test.question.clone(), test.answer.clone())
}

/// Context is `prompt question \n prompt answer \n test question`.
pub fn one_shot_request(prompt: &Sample, test: &Sample) -> Result<LogProbRequest, ProviderError> {
    LogProbRequest::new(
        format!("{}\n{}\n{}", prompt.question, prompt.answer, test.question),
        test.answer.clone(),
    )
}

fn provider_err(id: impl Into<String>) -> impl FnOnce(ProviderError) -> Error {
    let id = id.into();
    move |source| Error::Provider { id, source }
}

pub fn pair_id(prompt: &Sample, test: &Sample) -> String {
    format!("{} -> {}", prompt.id, test.id)
}

pub fn zero_shot_score<M: LanguageModel + ?Sized>(test: &Sample, model: &M) -> Result<f64> {
    let req = zero_shot_request(test).map_err(provider_err(&test.id))?;
    let resp = model.logprob(&req).map_err(provider_err(&test.id))?;
    Ok(resp.mean_logprob())
}

pub fn one_shot_score<M: LanguageModel + ?Sized>(prompt: &Sample, test: &Sample, model: &M) -> Result<f64> {
    let id = pair_id(prompt, test);
    let req = one_shot_request(prompt, test).map_err(provider_err(&id))?;
    let resp = model.logprob(&req).map_err(provider_err(id))?;
    Ok(resp.mean_logprob())
}

/// A probe set with cached zero-shot scores.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    name: String,
    samples: Vec<Sample>,
    zero_shot: BTreeMap<String, f64>,
}

impl TestSet {
    pub fn new(name: impl Into<String>, samples: Vec<Sample>, zero_shot: BTreeMap<String, f64>) -> Result<Self> {
        let name = name.into();
        if samples.is_empty() {
            return Err(Error::EmptyTestSet(name));
        }
        let ids: BTreeSet<&str> = samples.iter().map(|s| s.id.as_str()).collect();
        if ids.len() != samples.len() {
            return Err(Error::InvalidArgument(format!("test set {name:?} repeats a sample")));
        }
        if zero_shot.len() != ids.len() || !zero_shot.keys().all(|k| ids.contains(k.as_str())) {
            return Err(Error::InvalidArgument(format!(
                "zero-shot scores of {name:?} do not cover exactly its samples"
            )));
        }
        if let Some((id, v)) = zero_shot.iter().find(|(_, v)| !v.is_finite() || **v > 0.0) {
            return Err(Error::InvalidArgument(format!("zero-shot score {v} for {id:?}")));
        }
        Ok(TestSet {
            name,
            samples,
            zero_shot,
        })
    }

    /// Scores every sample zero-shot, one call each.
    pub fn score<M: LanguageModel + ?Sized>(name: impl Into<String>, samples: Vec<Sample>, model: &M) -> Result<Self> {
        let zero_shot = samples
            .iter()
            .map(|s| Ok((s.id.clone(), zero_shot_score(s, model)?)))
            .collect::<Result<_>>()?;
        Self::new(name, samples, zero_shot)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn zero_shot(&self, i: usize) -> f64 {
        self.zero_shot[&self.samples[i].id]
    }

    pub fn zero_shot_scores(&self) -> &BTreeMap<String, f64> {
        &self.zero_shot
    }
}

/// Fraction of test samples whose one-shot score strictly exceeds the
/// zero-shot score. `one_shot[i]` pairs with `test_set.samples()[i]`.
pub fn quality_from_scores(one_shot: &[f64], test_set: &TestSet) -> Result<f64> {
    if one_shot.len() != test_set.len() {
        return Err(Error::InvalidArgument(format!(
            "{} one-shot scores for test set {:?} of {}",
            one_shot.len(),
            test_set.name,
            test_set.len()
        )));
    }
    let wins = one_shot
        .iter()
        .enumerate()
        .filter(|(i, &os)| os > test_set.zero_shot(*i))
        .count();
    Ok(wins as f64 / test_set.len() as f64)
}

pub fn quality_score<M: LanguageModel + ?Sized>(prompt: &Sample, test_set: &TestSet, model: &M) -> Result<f64> {
    if test_set.is_empty() {
        return Err(Error::EmptyTestSet(test_set.name.clone()));
    }
    let os = test_set
        .samples
        .iter()
        .map(|t| one_shot_score(prompt, t, model))
        .collect::<Result<Vec<_>>>()?;
    quality_from_scores(&os, test_set)
}

/// One row of a quality table; also the on-disk JSONL record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    pub id: String,
    pub qs: f64,
    #[serde(default)]
    pub per_testset: BTreeMap<String, f64>,
    #[serde(default)]
    pub label: Option<u8>,
}

impl QualityRow {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(self.qs) {
            return Err(Error::InvalidArgument(format!(
                "{}: qs {} outside [0, 1]",
                self.id, self.qs
            )));
        }
        if let Some((t, v)) = self.per_testset.iter().find(|(_, v)| !in_unit(**v)) {
            return Err(Error::InvalidArgument(format!(
                "{}: score {v} on {t:?} outside [0, 1]",
                self.id
            )));
        }
        if !self.per_testset.is_empty() {
            let mean = mean(self.per_testset.values().copied());
            if (mean - self.qs).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "{}: qs {} is not the mean {mean} of its per-test-set scores",
                    self.id, self.qs
                )));
            }
        }
        if let Some(l) = self.label {
            if !(1..=5).contains(&l) {
                return Err(Error::InvalidArgument(format!("{}: label {l} outside 1..=5", self.id)));
            }
        }
        Ok(())
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Per-sample quality scores in `[0, 1]`, keyed by sample id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QualityTable {
    rows: BTreeMap<String, QualityRow>,
}

impl QualityTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, row: QualityRow) -> Result<()> {
        row.validate()?;
        if self.rows.contains_key(&row.id) {
            return Err(Error::DuplicateId(row.id));
        }
        self.rows.insert(row.id.clone(), row);
        Ok(())
    }

    pub fn score(&self, id: &str) -> Option<f64> {
        self.rows.get(id).map(|r| r.qs)
    }

    pub fn row(&self, id: &str) -> Option<&QualityRow> {
        self.rows.get(id)
    }

    /// Rows in id order.
    pub fn rows(&self) -> impl Iterator<Item = &QualityRow> {
        self.rows.values()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Label for `id`: the stored one, else the discretized score.
    pub fn label(&self, id: &str) -> Option<u8> {
        let row = self.rows.get(id)?;
        row.label.or_else(|| discretize(row.qs).ok())
    }
}

/// Builds the quality table from a one-shot score oracle.
///
/// `one_shot(k, t, i)` returns the one-shot score of `prompts[k]` on sample
/// `i` of `test_sets[t]`. Every pair is requested exactly once.
pub fn assemble_quality<F>(prompts: &[Sample], test_sets: &[TestSet], mut one_shot: F) -> Result<QualityTable>
where
    F: FnMut(usize, usize, usize) -> Result<f64>,
{
    if prompts.is_empty() {
        return Err(Error::InvalidArgument("no prompt samples".to_string()));
    }
    if test_sets.is_empty() {
        return Err(Error::InvalidArgument("no test sets".to_string()));
    }
    let mut names = BTreeSet::new();
    for t in test_sets {
        if t.is_empty() {
            return Err(Error::EmptyTestSet(t.name.clone()));
        }
        if !names.insert(t.name.as_str()) {
            return Err(Error::InvalidArgument(format!("test set {:?} given twice", t.name)));
        }
    }
    let mut table = QualityTable::new();
    for (k, prompt) in prompts.iter().enumerate() {
        let mut per_testset = BTreeMap::new();
        for (ti, t) in test_sets.iter().enumerate() {
            let os = (0..t.len()).map(|i| one_shot(k, ti, i)).collect::<Result<Vec<_>>>()?;
            per_testset.insert(t.name.clone(), quality_from_scores(&os, t)?);
        }
        // Per-test-set order is by name; the mean is over the same values.
        let qs = mean(per_testset.values().copied());
        table.insert(QualityRow {
            id: prompt.id.clone(),
            qs,
            per_testset,
            label: Some(discretize(qs)?),
        })?;
    }
    Ok(table)
}

/// Serial scoring of every prompt against every test set.
pub fn score_corpus<M: LanguageModel + ?Sized>(
    prompts: &[Sample],
    test_sets: &[TestSet],
    model: &M,
) -> Result<QualityTable> {
    assemble_quality(prompts, test_sets, |k, t, i| {
        one_shot_score(&prompts[k], &test_sets[t].samples[i], model)
    })
}

/// Prompt candidates and unscored test samples chosen from a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringSamples {
    pub prompts: Vec<Sample>,
    pub tests: Vec<(String, Vec<Sample>)>,
}

/// Picks test and prompt samples.
///
/// Each test set is `min(n2, n)` samples chosen by k-center greedy (empty
/// seed pool) over that dataset's embeddings, in pick order. Prompt
/// candidates are up to `n1` uniform draws without replacement per prompt
/// dataset, excluding any sample already used as a test sample, kept in file
/// order.
pub fn choose_scoring_samples(
    corpus: &Corpus,
    prompt_datasets: &[String],
    test_datasets: &[String],
    embeddings: &EmbeddingSet,
    n1: usize,
    n2: usize,
    rng_seed: u64,
) -> Result<ScoringSamples> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidArgument("n1 and n2 must be >= 1".to_string()));
    }
    let dataset = |name: &str| {
        corpus
            .dataset(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown dataset {name:?}")))
    };

    let mut test_ids = BTreeSet::new();
    let mut tests = Vec::with_capacity(test_datasets.len());
    for name in test_datasets {
        let samples = dataset(name)?;
        let sub = embeddings
            .subset(samples.iter().map(|s| s.id.as_str()))
            .map_err(|_| Error::MissingEmbeddings(name.clone()))?;
        let budget = n2.min(samples.len());
        let picks = kcenter_greedy(&sub, &[], budget, rng::derive_seed(rng_seed, &format!("test:{name}")))?;
        let chosen: Vec<Sample> = picks.into_iter().map(|i| samples[i].clone()).collect();
        test_ids.extend(chosen.iter().map(|s| s.id.clone()));
        tests.push((name.clone(), chosen));
    }

    let mut prompts = Vec::new();
    for name in prompt_datasets {
        let pool: Vec<&Sample> = dataset(name)?.iter().filter(|s| !test_ids.contains(&s.id)).collect();
        let take = n1.min(pool.len());
        let mut idx = rng::sample_indices(pool.len(), take, rng::derive_seed(rng_seed, &format!("prompt:{name}")));
        idx.sort_unstable();
        prompts.extend(idx.into_iter().map(|i| pool[i].clone()));
    }
    Ok(ScoringSamples { prompts, tests })
}

/// [`choose_scoring_samples`] followed by serial zero-shot scoring.
#[allow(clippy::too_many_arguments)]
pub fn build_prompt_and_test_sets<M: LanguageModel + ?Sized>(
    corpus: &Corpus,
    prompt_datasets: &[String],
    test_datasets: &[String],
    embeddings: &EmbeddingSet,
    n1: usize,
    n2: usize,
    rng_seed: u64,
    model: &M,
) -> Result<(Vec<Sample>, Vec<TestSet>)> {
    let chosen = choose_scoring_samples(corpus, prompt_datasets, test_datasets, embeddings, n1, n2, rng_seed)?;
    let tests = chosen
        .tests
        .into_iter()
        .map(|(name, samples)| TestSet::score(name, samples, model))
        .collect::<Result<_>>()?;
    Ok((chosen.prompts, tests))
}
