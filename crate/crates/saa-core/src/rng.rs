//! Counter-based seed derivation for reproducible parallel simulation.
//!
//! Every simulated game owns a `ChaCha8Rng` seeded from
//! `(master seed, stream tag, counter)` so that batch results are identical
//! no matter how games are scheduled across worker threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; decorrelates structured counter inputs.
#[inline]
pub fn mix64(seed: u64, value: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(value.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A labeled point in the seed tree. `derive` descends one level,
/// `rng_for` hands out the generator for one indexed unit of work.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    state: u64,
}

impl SeedStream {
    pub fn new(master_seed: u64) -> Self {
        SeedStream { state: mix64(0x5aa5_5aa5_5aa5_5aa5, master_seed) }
    }

    pub fn derive(&self, tag: u64) -> SeedStream {
        SeedStream { state: mix64(self.state, tag) }
    }

    pub fn seed_for(&self, index: u64) -> u64 {
        mix64(self.state, index)
    }

    pub fn rng_for(&self, index: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed_for(index))
    }
}

/// Stream tags for the independent consumers of a master seed.
pub mod stream {
    /// Self-confirming solver iterations.
    pub const SOLVER: u64 = 1;
    /// Profile payoff estimation.
    pub const PROFILE: u64 = 2;
    /// Straightforward-bidding baseline batches.
    pub const SB_BASELINE: u64 = 3;
    /// Bootstrap resampling.
    pub const BOOTSTRAP: u64 = 4;
}
