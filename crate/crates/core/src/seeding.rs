//! Seed derivation for independent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Every consumer of randomness draws from its own stream so that
/// adding or removing draws in one place never shifts another.
pub mod stream {
    pub const ACTOR_INIT: u64 = 1;
    pub const CRITIC1_INIT: u64 = 2;
    pub const CRITIC2_INIT: u64 = 3;
    pub const ACTIONS: u64 = 4;
    pub const TRAINING: u64 = 5;
    pub const EPISODES: u64 = 6;
    pub const EVALUATION: u64 = 7;
}

/// SplitMix64 finalizer over `(seed, tag)`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}
