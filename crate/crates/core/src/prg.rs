//! Seed expansion.
//!
//! A run is keyed by one `u64`. Every component derives its own stream by
//! keying ChaCha8 with the run seed and selecting a 64-bit stream id, so
//! components never share keystream and each one is replayable on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids for the components of one estimator instance.
pub mod stream {
    pub const REDUCTION: u64 = 1;
    pub const HIGHEND: u64 = 2;
    pub const FPHH: u64 = 3;
    pub const LIGHT: u64 = 4;
    pub const FPEST: u64 = 5;
    pub const FINGERPRINT: u64 = 6;
    pub const COUNTSKETCH: u64 = 7;
    pub const BUCKETS: u64 = 8;
}

/// Keystream for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of the `i`-th independent sub-run of `seed` (instances, trials).
pub fn sub_seed(seed: u64, i: u64) -> u64 {
    use rand::RngCore;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x5eed_0000_0000_0000 | i);
    rng.next_u64()
}
