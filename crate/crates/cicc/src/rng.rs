//! Deterministic randomness streams.
//!
//! Every random draw in the crate descends from one `u64` manifest seed. A
//! stream is addressed by a path of integers (frame index, block index, layer,
//! purpose); the path is folded through SplitMix64 into a 256-bit ChaCha8 key.
//! Distinct paths give independent streams, so frames can be processed on any
//! number of workers in any order and still reproduce bit-for-bit.
//!
//! The generator identity is pinned: ChaCha8 as shipped by `rand_chacha` 0.3,
//! keyed by the 32 bytes produced below, with `f64` sampling via `gen::<f64>`.
//! Changing any of these would silently re-randomize archived runs.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Well-mixed 64-bit permutation used to fold seed paths.
#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Derives the independent stream addressed by `path` under `seed`.
pub fn derive_rng(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut state = splitmix64(seed ^ 0x6363_6963_2d64_7276); // distinct domain tag
    for &p in path {
        state = splitmix64(state ^ p);
    }
    let mut key = [0u8; 32];
    let mut word = state;
    for chunk in key.chunks_exact_mut(8) {
        word = splitmix64(word);
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Purpose tags used when deriving per-frame streams. Kept in one place so
/// encoder and harness agree on addresses.
pub mod purpose {
    pub const MESSAGES: u64 = 1;
    pub const FROZEN: u64 = 2;
    pub const SEED_SYMBOLS: u64 = 3;
    pub const PREFIX: u64 = 4;
    pub const SAMPLING: u64 = 5;
    pub const CHANNEL: u64 = 6;
    pub const PROFILE: u64 = 7;
}
