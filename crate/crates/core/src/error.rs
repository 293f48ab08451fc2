use alloc::string::String;

use thiserror::Error;

use crate::provider::ProviderError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("unknown id {0:?}")]
    UnknownId(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in vector for {0:?}")]
    NonFinite(String),

    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("budget {budget} with seed pool {seed} exceeds {n} points")]
    BudgetInfeasible { budget: usize, seed: usize, n: usize },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no datasets strictly between bounds")]
    EmptyNumerator,

    #[error("empty test set {0:?}")]
    EmptyTestSet(String),

    #[error("missing embeddings for dataset {0:?}")]
    MissingEmbeddings(String),

    #[error("provider failed on {id}: {source}")]
    Provider {
        id: String,
        #[source]
        source: ProviderError,
    },
}
