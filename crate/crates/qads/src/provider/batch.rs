use std::collections::BTreeMap;

use qads_core::provider::{EmbeddingResponse, LanguageModel, LogProbRequest, LogProbResponse, ProviderError};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Maps `f` over `items` with at most `parallelism` calls in flight. Output
/// order matches input order regardless of completion order.
pub fn run_bounded<T, R, F>(items: &[T], parallelism: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if parallelism == 0 {
        return Err(Error::Config(vec!["parallelism must be >= 1".to_string()]));
    }
    if parallelism == 1 || items.len() <= 1 {
        return Ok(items.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Config(vec![format!("thread pool: {e}")]))?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}

fn keyed<V>(ids: impl Iterator<Item = String>, results: Vec<Result<V, ProviderError>>) -> Result<BTreeMap<String, V>> {
    let mut out = BTreeMap::new();
    for (id, r) in ids.zip(results) {
        match r {
            Ok(v) => {
                out.insert(id, v);
            }
            Err(source) => return Err(Error::Batch { id, source }),
        }
    }
    Ok(out)
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a String>) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(qads_core::Error::DuplicateId(id.clone()).into());
        }
    }
    Ok(())
}

/// Log-probabilities for `(id, request)` pairs. The first failing item in
/// input order fails the batch.
pub fn batch_logprob<M>(
    model: &M,
    requests: &[(String, LogProbRequest)],
    parallelism: usize,
) -> Result<BTreeMap<String, LogProbResponse>>
where
    M: LanguageModel + Sync + ?Sized,
{
    check_unique(requests.iter().map(|(id, _)| id))?;
    let results = run_bounded(requests, parallelism, |(_, req)| model.logprob(req))?;
    keyed(requests.iter().map(|(id, _)| id.clone()), results)
}

/// Embeddings for `(id, text)` pairs.
pub fn batch_embed<M>(
    model: &M,
    texts: &[(String, String)],
    parallelism: usize,
) -> Result<BTreeMap<String, EmbeddingResponse>>
where
    M: LanguageModel + Sync + ?Sized,
{
    check_unique(texts.iter().map(|(id, _)| id))?;
    let results = run_bounded(texts, parallelism, |(_, text)| model.embed(text))?;
    keyed(texts.iter().map(|(id, _)| id.clone()), results)
}
