//! Seed derivation.
//!
//! Every stochastic stage draws from its own ChaCha8 stream, keyed by the
//! run seed, a stage tag and an index (chunk number, channel, ...). Streams
//! never share state, so work split across threads reproduces the
//! sequential output bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stage tags used when deriving sub-seeds.
pub mod tag {
    pub const SPECKLE: u64 = 0x5350_454b;
    pub const MODULATION: u64 = 0x4d4f_4455;
    pub const LASER_PHASE: u64 = 0x5048_4153;
    pub const ARRIVALS: u64 = 0x4152_5256;
    pub const DARK: u64 = 0x4441_524b;
    pub const JITTER: u64 = 0x4a49_5454;
    pub const SPLIT: u64 = 0x5350_4c54;
    pub const BOOTSTRAP: u64 = 0x424f_4f54;
    pub const RUN: u64 = 0x5255_4e53;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a parent seed with a tag and index into an independent child seed.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ tag) ^ index)
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn derived_rng(seed: u64, tag: u64, index: u64) -> SimRng {
    rng_from_seed(derive_seed(seed, tag, index))
}
