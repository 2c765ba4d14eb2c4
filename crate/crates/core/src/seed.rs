//! Seed derivation.
//!
//! Every random stream in the pipeline is derived from one global seed plus a
//! short path of stage/shard/ordinal integers, so any unit of work can be
//! regenerated in isolation and results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StageRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `path` into `base`. Order matters: `derive(s, &[1, 2]) != derive(s, &[2, 1])`.
pub fn derive(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(base: u64, path: &[u64]) -> StageRng {
    ChaCha8Rng::seed_from_u64(derive(base, path))
}

/// Per-stage tags so that stages sharing a global seed never share a stream.
pub mod stage {
    pub const MIX: u64 = 1;
    pub const PAIRS: u64 = 2;
    pub const MASKING: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const INIT: u64 = 5;
    pub const BATCH: u64 = 6;
    pub const DROPOUT: u64 = 7;
    pub const SIGTEST: u64 = 8;
    pub const GRADCHECK: u64 = 9;
    pub const SYNTH: u64 = 10;
}
