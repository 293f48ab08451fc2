//! File formats, provider clients, mixture assembly, and the pipeline
//! behind the `qads` command line, built on [`qads_core`].

pub mod config;
pub mod embfile;
pub mod error;
pub mod jsonl;
pub mod mixture;
pub mod pipeline;
pub mod provider;
pub mod report;
pub mod scoring;

pub use error::{Error, Result};
pub use qads_core;
