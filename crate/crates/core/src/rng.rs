//! Seed derivation.
//!
//! Every random stream in the crate is derived from a master seed and a
//! stable textual label, so that adding or reordering work items never
//! perturbs the streams of other items.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for all sampling in the crate.
pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(label: &str) -> u64 {
    label
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` and a stable label.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    splitmix64(splitmix64(master) ^ fnv1a(label))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
