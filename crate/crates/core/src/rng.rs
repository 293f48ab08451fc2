//! Seeded randomness. Every random draw in the crate goes through here so
//! that runs are reproducible from a single integer seed.

use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent sub-seed for a named stage or dataset.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    let out = h.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&out[..8]);
    u64::from_le_bytes(word)
}

/// `amount` distinct indices drawn uniformly from `0..n`, in draw order.
///
/// Panics if `amount > n`; callers validate first.
pub fn sample_indices(n: usize, amount: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_from_seed(seed);
    index::sample(&mut rng, n, amount).into_vec()
}
