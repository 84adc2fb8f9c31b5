//! Deterministic derivation of per-task seeds from one root seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer applied to `root` offset by `index`.
///
/// Each index yields an independent-looking stream, so batches can be run in
/// any order or in parallel without changing their results.
pub fn split(root: u64, index: u64) -> u64 {
    let mut z = root.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Generator for item `index` of a batch rooted at `root`.
pub fn child_rng(root: u64, index: u64) -> Rng {
    rng(split(root, index))
}
