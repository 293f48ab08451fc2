//! Provider-backed stages run with bounded parallelism: embedding a corpus,
//! building prompt/test sets, and scoring prompts.

use std::collections::BTreeMap;

use qads_core::corpus::{Corpus, Sample};
use qads_core::geometry::EmbeddingSet;
use qads_core::provider::LanguageModel;
use qads_core::quality::{
    assemble_quality, choose_scoring_samples, one_shot_request, pair_id, zero_shot_request, QualityTable, TestSet,
};

use crate::error::{Error, Result};
use crate::provider::{batch_embed, batch_logprob, run_bounded};

/// Embeds the listed datasets (all of them when `datasets` is `None`), rows
/// in dataset-name then file order.
pub fn embed_corpus<M>(
    corpus: &Corpus,
    datasets: Option<&[String]>,
    model: &M,
    parallelism: usize,
    question_only: bool,
) -> Result<EmbeddingSet>
where
    M: LanguageModel + Sync + ?Sized,
{
    let wanted = |name: &str| datasets.is_none_or(|d| d.iter().any(|x| x == name));
    let texts: Vec<(String, String)> = corpus
        .datasets()
        .filter(|(name, _)| wanted(name))
        .flat_map(|(_, samples)| samples.iter())
        .map(|s| (s.id.clone(), s.embedding_text(question_only)))
        .collect();
    let mut vectors = batch_embed(model, &texts, parallelism)?;
    let dim = vectors.values().next().map(|v| v.dim()).unwrap_or(1);
    let mut emb = EmbeddingSet::new(dim)?;
    for (id, _) in &texts {
        let v = vectors.remove(id).expect("batch covers every id");
        emb.push(id.clone(), v.vector())?;
    }
    Ok(emb)
}

/// Test sets (k-center picks, zero-shot scored in parallel) and prompt
/// candidates.
#[allow(clippy::too_many_arguments)]
pub fn build_prompt_and_test_sets<M>(
    corpus: &Corpus,
    prompt_datasets: &[String],
    test_datasets: &[String],
    embeddings: &EmbeddingSet,
    n1: usize,
    n2: usize,
    rng_seed: u64,
    model: &M,
    parallelism: usize,
) -> Result<(Vec<Sample>, Vec<TestSet>)>
where
    M: LanguageModel + Sync + ?Sized,
{
    let chosen = choose_scoring_samples(corpus, prompt_datasets, test_datasets, embeddings, n1, n2, rng_seed)?;
    let mut requests = Vec::new();
    for (_, samples) in &chosen.tests {
        for s in samples {
            let req = zero_shot_request(s).map_err(|source| Error::Batch {
                id: s.id.clone(),
                source,
            })?;
            requests.push((s.id.clone(), req));
        }
    }
    let responses = batch_logprob(model, &requests, parallelism)?;
    let tests = chosen
        .tests
        .into_iter()
        .map(|(name, samples)| {
            let zs: BTreeMap<String, f64> = samples
                .iter()
                .map(|s| (s.id.clone(), responses[&s.id].mean_logprob()))
                .collect();
            TestSet::new(name, samples, zs).map_err(Error::from)
        })
        .collect::<Result<_>>()?;
    Ok((chosen.prompts, tests))
}

/// Scores every prompt against every test set. Issues exactly
/// `prompts.len() * sum(test set sizes)` one-shot calls.
pub fn score_corpus<M>(prompts: &[Sample], test_sets: &[TestSet], model: &M, parallelism: usize) -> Result<QualityTable>
where
    M: LanguageModel + Sync + ?Sized,
{
    if prompts.is_empty() {
        return Err(qads_core::Error::InvalidArgument("no prompt samples".to_string()).into());
    }
    let offsets: Vec<usize> = test_sets
        .iter()
        .scan(0, |acc, t| {
            let start = *acc;
            *acc += t.len();
            Some(start)
        })
        .collect();
    let per_prompt: usize = test_sets.iter().map(TestSet::len).sum();
    let pairs: Vec<(usize, usize, usize)> = (0..prompts.len())
        .flat_map(|k| {
            test_sets
                .iter()
                .enumerate()
                .flat_map(move |(t, ts)| (0..ts.len()).map(move |i| (k, t, i)))
        })
        .collect();
    let results = run_bounded(&pairs, parallelism, |&(k, t, i)| {
        let test = &test_sets[t].samples()[i];
        one_shot_request(&prompts[k], test)
            .and_then(|req| model.logprob(&req))
            .map(|r| r.mean_logprob())
    })?;
    let mut scores = Vec::with_capacity(results.len());
    for (&(k, t, i), r) in pairs.iter().zip(results) {
        match r {
            Ok(v) => scores.push(v),
            Err(source) => {
                return Err(Error::Batch {
                    id: pair_id(&prompts[k], &test_sets[t].samples()[i]),
                    source,
                })
            }
        }
    }
    let table = assemble_quality(
        prompts,
        test_sets,
        |k, t, i| Ok(scores[k * per_prompt + offsets[t] + i]),
    )?;
    Ok(table)
}
