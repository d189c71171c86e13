//! Seeded randomness shared by every stochastic step.
//!
//! All randomness flows from a SplitMix64 generator so that results are
//! reproducible from a single 64-bit seed. The shuffle is a plain
//! Fisher–Yates pass that draws `next_u64() % (i + 1)` for `i` from
//! `len - 1` down to `1`; any implementation following those two rules
//! reproduces the same permutation.

use rand::RngCore;
use rand::SeedableRng;
pub use rand_xoshiro::SplitMix64;

pub fn seeded(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

pub fn shuffle<T>(items: &mut [T], rng: &mut SplitMix64) {
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

/// Uniform draw in `[0, 1)` with 53 bits of precision.
pub fn unit_f64(rng: &mut SplitMix64) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
