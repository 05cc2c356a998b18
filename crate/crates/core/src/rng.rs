//! Seed handling: one root seed fans out into independent, reproducible
//! sub-streams (per environment, per episode, per evaluation worker).

use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Derive a sub-seed from a root seed and a stream label.
///
/// SplitMix64 finalizer; labels that differ in a single bit produce
/// uncorrelated streams.
pub fn sub_seed(root: u64, label: u64) -> u64 {
    let mut z = root ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream seeded from `(root, label)`.
pub fn stream(root: u64, label: u64) -> Stream {
    use rand::SeedableRng;
    Stream::seed_from_u64(sub_seed(root, label))
}
