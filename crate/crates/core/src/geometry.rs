//! Embedding storage, distances, and k-center greedy selection.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Seed pool size used when the caller does not supply one.
pub const DEFAULT_SEED_POOL: usize = 100;

/// Dense `n x dim` embeddings keyed by sample id, rows in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    ids: Vec<String>,
    index: BTreeMap<String, usize>,
    data: Vec<f32>,
}

impl EmbeddingSet {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be >= 1".to_string()));
        }
        Ok(EmbeddingSet {
            dim,
            ids: Vec::new(),
            index: BTreeMap::new(),
            data: Vec::new(),
        })
    }

    pub fn push(&mut self, id: impl Into<String>, vector: &[f32]) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(id));
        }
        if self.index.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.data.chunks_exact(self.dim))
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.position(id).map(|i| self.row(i))
    }

    /// New set holding the given ids, in the given order.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<EmbeddingSet> {
        let mut out = EmbeddingSet::new(self.dim)?;
        for id in ids {
            let row = self.get(id).ok_or_else(|| Error::UnknownId(id.to_string()))?;
            out.push(id, row)?;
        }
        Ok(out)
    }

    /// Copy with every row scaled to unit L2 norm. Zero rows stay zero.
    pub fn normalized(&self) -> EmbeddingSet {
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(self.dim) {
            let norm = libm::sqrt(row.iter().map(|&v| v as f64 * v as f64).sum::<f64>());
            if norm > 0.0 {
                for v in row.iter_mut() {
                    *v = (*v as f64 / norm) as f32;
                }
            }
        }
        out
    }

    /// View of the set under `metric`: unchanged for Euclidean, normalized
    /// for cosine (where Euclidean distance on unit vectors orders like
    /// cosine distance).
    pub fn for_metric(&self, metric: Metric) -> EmbeddingSet {
        match metric {
            Metric::Euclidean => self.clone(),
            Metric::Cosine => self.normalized(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

/// Euclidean distance with f64 accumulation.
pub fn distance(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(euclidean(a, b))
}

#[inline]
pub(crate) fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    let sq: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    libm::sqrt(sq)
}

/// Pool of selected points plus each point's distance to its nearest pool
/// member. Empty pools give every point an infinite distance.
#[derive(Debug, Clone, PartialEq)]
pub struct KCenterState {
    pool: Vec<usize>,
    in_pool: Vec<bool>,
    min_dist: Vec<f64>,
    seed_size: usize,
}

impl KCenterState {
    pub fn new(emb: &EmbeddingSet, seed: &[usize]) -> Result<Self> {
        let n = emb.len();
        let mut state = KCenterState {
            pool: Vec::with_capacity(seed.len()),
            in_pool: vec![false; n],
            min_dist: vec![f64::INFINITY; n],
            seed_size: seed.len(),
        };
        for &s in seed {
            state.add(emb, s)?;
        }
        Ok(state)
    }

    /// Adds `index` to the pool, lowering every point's nearest-pool
    /// distance where the new member is closer. O(n * dim).
    pub fn add(&mut self, emb: &EmbeddingSet, index: usize) -> Result<()> {
        let n = self.min_dist.len();
        if index >= n {
            return Err(Error::IndexOutOfRange { index, len: n });
        }
        if self.in_pool[index] {
            return Err(Error::InvalidArgument(alloc::format!("index {index} already in pool")));
        }
        let center = emb.row(index);
        for (j, d) in self.min_dist.iter_mut().enumerate() {
            let nd = euclidean(center, emb.row(j));
            if nd < *d {
                *d = nd;
            }
        }
        self.min_dist[index] = 0.0;
        self.in_pool[index] = true;
        self.pool.push(index);
        Ok(())
    }

    pub fn pool(&self) -> &[usize] {
        &self.pool
    }

    pub fn min_dist(&self) -> &[f64] {
        &self.min_dist
    }

    pub fn seed_size(&self) -> usize {
        self.seed_size
    }

    pub fn contains(&self, index: usize) -> bool {
        self.in_pool[index]
    }

    /// Points picked after the seed pool, in selection order.
    pub fn picked(&self) -> &[usize] {
        &self.pool[self.seed_size..]
    }

    /// Largest nearest-pool distance over all points.
    pub fn covering_radius(&self) -> f64 {
        self.min_dist.iter().copied().fold(0.0, f64::max)
    }
}

/// Seed pool size for a dataset of `n` points with `budget` picks: at most
/// [`DEFAULT_SEED_POOL`], and never more than the points left over.
pub fn seed_pool_size(n: usize, budget: usize) -> usize {
    DEFAULT_SEED_POOL.min(n.saturating_sub(budget))
}

/// `size` distinct indices in `0..n` drawn uniformly, `size` clamped to `n`.
pub fn random_seed_pool(n: usize, size: usize, rng_seed: u64) -> Vec<usize> {
    rng::sample_indices(n, size.min(n), rng::derive_seed(rng_seed, "seed-pool"))
}

/// Shared greedy loop. Validates inputs, draws the random start when the seed
/// pool is empty, then asks `pick` for the next index until `budget` points
/// have been added. Returns the picks in order.
pub(crate) fn greedy<F>(
    emb: &EmbeddingSet,
    seed: &[usize],
    budget: usize,
    rng_seed: u64,
    mut pick: F,
) -> Result<Vec<usize>>
where
    F: FnMut(&KCenterState) -> usize,
{
    let n = emb.len();
    if budget + seed.len() > n {
        return Err(Error::BudgetInfeasible {
            budget,
            seed: seed.len(),
            n,
        });
    }
    let mut state = KCenterState::new(emb, seed)?;
    if budget == 0 {
        return Ok(Vec::new());
    }
    if seed.is_empty() {
        let start = rng::rng_from_seed(rng::derive_seed(rng_seed, "kcenter-start")).random_range(0..n);
        state.add(emb, start)?;
    }
    while state.picked().len() < budget {
        let u = pick(&state);
        state.add(emb, u)?;
    }
    Ok(state.picked().to_vec())
}

/// K-center greedy: repeatedly adds the unselected point farthest from the
/// pool. Returns the `budget` new indices in selection order; ties go to the
/// smallest index. With an empty seed pool the first pick is a uniform
/// random point and counts against the budget.
pub fn kcenter_greedy(emb: &EmbeddingSet, seed: &[usize], budget: usize, rng_seed: u64) -> Result<Vec<usize>> {
    greedy(emb, seed, budget, rng_seed, |state| {
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, &d) in state.min_dist().iter().enumerate() {
            if !state.contains(i) && d > best_d {
                best = i;
                best_d = d;
            }
        }
        best
    })
}
