//! Seed derivation and the portable generator used everywhere in the crate.
//!
//! All randomness is produced by [`ChaCha8Rng`]. Independent streams are
//! derived from one master seed by folding a list of labels through the
//! SplitMix64 finalizer, so adding a new consumer never shifts the draws of
//! an existing one.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as PortableRng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit label for a stream name (FNV-1a).
pub fn label(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derives a child seed from `master` and a path of labels.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

pub fn rng_from_seed(seed: u64) -> PortableRng {
    PortableRng::seed_from_u64(seed)
}
