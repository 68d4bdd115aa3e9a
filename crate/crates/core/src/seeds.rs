//! Counter-based seed derivation.
//!
//! A master seed is split into independent streams by hashing
//! `(master, stream, index)`, so adding subjects or replications never shifts
//! the draws of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags used across the crate.
pub mod stream {
    pub const AGENT: u64 = 1;
    pub const SUBJECT: u64 = 2;
    pub const REPLICATION: u64 = 3;
    pub const MIXTURE: u64 = 4;
    pub const BDM: u64 = 5;
    pub const POPULATION: u64 = 6;
    pub const DEMOGRAPHICS: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}

pub fn rng_from(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, stream: u64, index: u64) -> SimRng {
    rng_from(derive(master, stream, index))
}
