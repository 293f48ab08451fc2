//! Quality-aware diverse data selection.
//!
//! The crate is `no_std` (it needs `alloc`) and holds the numerical core:
//! k-center greedy selection over embeddings, one-shot quality scoring
//! against any [`provider::LanguageModel`], the quality-weighted selector,
//! per-dataset selection ratios, and score analysis. File formats, HTTP
//! clients, and the command line live in the `qads` crate.
#![no_std]

extern crate alloc;

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod geometry;
pub mod provider;
pub mod quality;
pub mod rng;
pub mod selection;

pub use error::{Error, Result};
