#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use qads_core::corpus::Sample;
use qads_core::provider::{EmbeddingResponse, LanguageModel, LogProbRequest, LogProbResponse, ProviderError};

/// Samples `<name>-<i>` with varied text.
pub fn samples(name: &str, n: usize) -> Vec<Sample> {
    (0..n)
        .map(|i| {
            Sample::new(
                format!("{name}-{i}"),
                name,
                format!("{name} question {i}: what is {} plus {}?", i * 7 % 13, i % 5),
                format!("It is {}.", i * 7 % 13 + i % 5),
            )
            .unwrap()
        })
        .collect()
}

/// Writes `n` samples for `name` to `<dir>/<file>` and returns the path.
pub fn write_dataset(dir: &Path, file: &str, name: &str, n: usize) -> PathBuf {
    let path = dir.join(file);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).unwrap();
    }
    qads::jsonl::write_jsonl(&samples(name, n), &path).unwrap();
    path
}

/// Counts calls to the wrapped model.
pub struct Counting<M> {
    pub inner: M,
    pub logprob_calls: AtomicUsize,
    pub embed_calls: AtomicUsize,
}

impl<M> Counting<M> {
    pub fn new(inner: M) -> Self {
        Counting {
            inner,
            logprob_calls: AtomicUsize::new(0),
            embed_calls: AtomicUsize::new(0),
        }
    }

    pub fn logprobs(&self) -> usize {
        self.logprob_calls.load(Ordering::SeqCst)
    }
}

impl<M: LanguageModel> LanguageModel for Counting<M> {
    fn logprob(&self, req: &LogProbRequest) -> Result<LogProbResponse, ProviderError> {
        self.logprob_calls.fetch_add(1, Ordering::SeqCst);
        self.inner.logprob(req)
    }

    fn embed(&self, text: &str) -> Result<EmbeddingResponse, ProviderError> {
        self.embed_calls.fetch_add(1, Ordering::SeqCst);
        self.inner.embed(text)
    }

    fn identity(&self) -> String {
        self.inner.identity()
    }
}

/// Log-probabilities from a function of the request; embeddings from the
/// text length and first byte.
pub struct Scripted<F>(pub F);

impl<F> LanguageModel for Scripted<F>
where
    F: Fn(&LogProbRequest) -> Result<f64, ProviderError> + Sync,
{
    fn logprob(&self, req: &LogProbRequest) -> Result<LogProbResponse, ProviderError> {
        LogProbResponse::new(vec![(self.0)(req)?])
    }

    fn embed(&self, text: &str) -> Result<EmbeddingResponse, ProviderError> {
        let b = text.as_bytes();
        EmbeddingResponse::new(vec![b.len() as f32, b[0] as f32, b[b.len() - 1] as f32])
    }

    fn identity(&self) -> String {
        "scripted".to_string()
    }
}
