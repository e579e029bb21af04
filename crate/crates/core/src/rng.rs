//! Seeding rules. Every random draw in the toolkit comes from a
//! [`Xoshiro256PlusPlus`] generator, which `seed_from_u64` expands through
//! splitmix64, so streams are identical on every platform.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

/// One step of the splitmix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Seed for frame `index` of a batch distorted with `seed`.
pub fn frame_seed(seed: u64, index: u64) -> u64 {
    seed ^ splitmix64(index)
}

/// Derive an independent child seed from a parent seed and a list of
/// labels (e.g. task, scene, kind).
pub fn derive(seed: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(splitmix64(seed), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}
