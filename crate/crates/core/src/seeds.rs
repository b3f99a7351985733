//! Deterministic derivation of independent rng streams from one master
//! seed, so every subject/recording/stream can be generated in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(master), |acc, &p| splitmix(acc ^ splitmix(p)))
}

pub fn stream(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// Stream tags.
pub(crate) mod tag {
    pub const PROFILE: u64 = 1;
    pub const TRACE: u64 = 2;
    pub const MAGNETIC: u64 = 3;
    pub const IMU: u64 = 4;
    pub const IMU_BIAS: u64 = 5;
    pub const FIELD: u64 = 6;
}
