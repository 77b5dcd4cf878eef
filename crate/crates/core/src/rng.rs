//! Seeded random streams. Every random quantity in the crate flows from here
//! so that a seed fully determines traces and right-hand sides.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` samples from the uniform distribution on `[-1, 1]`.
pub fn uniform_vec(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
}
