//! The language-model contract consumed by quality scoring and embedding,
//! plus a deterministic hash-backed mock.
//!
//! Log-probabilities are natural logs, one per continuation token, under the
//! provider's own tokenizer. The core never tokenizes.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Transport-level failure that survived all retries.
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("provider returned status {status}: {message}")]
    Remote { status: u16, message: String },
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Transport { .. } => true,
            ProviderError::Remote { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogProbRequest {
    pub context: String,
    pub continuation: String,
}

impl LogProbRequest {
    pub fn new(context: impl Into<String>, continuation: impl Into<String>) -> Result<Self, ProviderError> {
        let req = LogProbRequest {
            context: context.into(),
            continuation: continuation.into(),
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.continuation.is_empty() {
            return Err(ProviderError::Precondition("empty continuation".to_string()));
        }
        Ok(())
    }
}

/// Per-token log-probabilities of a continuation. Always at least one token,
/// every entry finite and `<= 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogProbResponse {
    token_logprobs: Vec<f64>,
    token_count: usize,
}

impl LogProbResponse {
    pub fn new(token_logprobs: Vec<f64>) -> Result<Self, ProviderError> {
        let n = token_logprobs.len();
        Self::from_wire(token_logprobs, n)
    }

    /// Validates a response as received from a remote provider.
    pub fn from_wire(token_logprobs: Vec<f64>, token_count: usize) -> Result<Self, ProviderError> {
        if token_logprobs.is_empty() {
            return Err(ProviderError::Protocol("empty token list".to_string()));
        }
        if token_count != token_logprobs.len() {
            return Err(ProviderError::Protocol(format!(
                "token_count {token_count} but {} logprobs",
                token_logprobs.len()
            )));
        }
        if let Some((i, v)) = token_logprobs
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v > 0.0)
        {
            return Err(ProviderError::Protocol(format!("token {i} has invalid logprob {v}")));
        }
        Ok(LogProbResponse {
            token_logprobs,
            token_count,
        })
    }

    pub fn token_logprobs(&self) -> &[f64] {
        &self.token_logprobs
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    /// Length-normalized log-likelihood, `(1/L) * sum log p`.
    pub fn mean_logprob(&self) -> f64 {
        self.token_logprobs.iter().sum::<f64>() / self.token_count as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingResponse {
    vector: Vec<f32>,
}

impl EmbeddingResponse {
    pub fn new(vector: Vec<f32>) -> Result<Self, ProviderError> {
        if vector.is_empty() {
            return Err(ProviderError::Protocol("empty embedding".to_string()));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(ProviderError::Protocol("non-finite embedding value".to_string()));
        }
        Ok(EmbeddingResponse { vector })
    }

    pub fn vector(&self) -> &[f32] {
        &self.vector
    }

    pub fn into_vector(self) -> Vec<f32> {
        self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// A language model that can score continuations and embed text.
///
/// Implementations must be deterministic for identical requests and safe to
/// call concurrently when shared.
pub trait LanguageModel {
    fn logprob(&self, req: &LogProbRequest) -> Result<LogProbResponse, ProviderError>;

    fn embed(&self, text: &str) -> Result<EmbeddingResponse, ProviderError>;

    /// Stable description recorded in artifacts, e.g. `mock:seed=1:dim=8`.
    fn identity(&self) -> String;
}

impl<M: LanguageModel + ?Sized> LanguageModel for &M {
    fn logprob(&self, req: &LogProbRequest) -> Result<LogProbResponse, ProviderError> {
        (**self).logprob(req)
    }

    fn embed(&self, text: &str) -> Result<EmbeddingResponse, ProviderError> {
        (**self).embed(text)
    }

    fn identity(&self) -> String {
        (**self).identity()
    }
}

/// Deterministic stand-in for a real model.
///
/// Tokens are whitespace-separated words. Each token's log-probability is a
/// keyed hash of `(context, continuation, token index)` mapped into
/// `[-5, -0.01]`; embedding coordinates are keyed hashes of `(text, index)`
/// mapped into `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MockProvider {
    seed: u64,
    dim: usize,
}

const MOCK_LP_MIN: f64 = -5.0;
const MOCK_LP_MAX: f64 = -0.01;

impl MockProvider {
    pub fn new(seed: u64, dim: usize) -> Result<Self, ProviderError> {
        if dim == 0 {
            return Err(ProviderError::Precondition("mock dimension must be >= 1".to_string()));
        }
        Ok(MockProvider { seed, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn unit(&self, tag: &[u8], parts: &[&str], index: u64) -> f64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(tag);
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p.as_bytes());
        }
        h.update(index.to_le_bytes());
        let out = h.finalize();
        let mut word = [0u8; 8];
        word.copy_from_slice(&out[..8]);
        // 53 high bits -> [0, 1]
        (u64::from_le_bytes(word) >> 11) as f64 / ((1u64 << 53) - 1) as f64
    }
}

impl LanguageModel for MockProvider {
    fn logprob(&self, req: &LogProbRequest) -> Result<LogProbResponse, ProviderError> {
        req.validate()?;
        let tokens = req.continuation.split_whitespace().count().max(1);
        let lps = (0..tokens as u64)
            .map(|j| {
                let u = self.unit(b"logprob", &[&req.context, &req.continuation], j);
                MOCK_LP_MIN + u * (MOCK_LP_MAX - MOCK_LP_MIN)
            })
            .collect();
        LogProbResponse::new(lps)
    }

    fn embed(&self, text: &str) -> Result<EmbeddingResponse, ProviderError> {
        if text.is_empty() {
            return Err(ProviderError::Precondition("empty text".to_string()));
        }
        let v = (0..self.dim as u64)
            .map(|i| (2.0 * self.unit(b"embed", &[text], i) - 1.0) as f32)
            .collect();
        EmbeddingResponse::new(v)
    }

    fn identity(&self) -> String {
        format!("mock:seed={}:dim={}", self.seed, self.dim)
    }
}
