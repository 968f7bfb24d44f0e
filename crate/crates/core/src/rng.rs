//! Seed derivation.
//!
//! Every stochastic routine draws from a `ChaCha8Rng`. A task identified by
//! `(master, a, b)` (for example a rate index and a replicate index) is seeded
//! with [`derive_seed`], which feeds the three words through SplitMix64. The
//! resulting `u64` goes through `SeedableRng::seed_from_u64`. Both steps are
//! fixed, platform-independent bit manipulations, so a given master seed
//! reproduces the same numbers on any machine and under any thread schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-task `(a, b)` of the stream rooted at `master`.
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ a) ^ b)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn task_rng(master: u64, a: u64, b: u64) -> ChaCha8Rng {
    rng_from_seed(derive_seed(master, a, b))
}
