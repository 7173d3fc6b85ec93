//! Seeded randomness.
//!
//! All randomness in the crate flows from explicit 64-bit seeds:
//!
//! * The stream generator is ChaCha8 (`rand_chacha::ChaCha8Rng`), seeded with
//!   `SeedableRng::seed_from_u64`, which expands the 64-bit seed with PCG32
//!   (multiplier `6364136223846793005`, increment `11634580027462260723`).
//!   Each stream is a pure function of its seed on every platform.
//! * Sub-seeds (per size, per instance, per role) are derived with the
//!   SplitMix64 finalizer, so concurrent workers never coordinate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function applied to `x + GOLDEN_GAMMA`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed from a parent seed and a sequence of labels.
pub fn derive_seed(parent: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(parent), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
