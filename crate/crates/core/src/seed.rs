//! Seed derivation for independent RNG streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every random draw in the crate.
pub type Rng = ChaCha8Rng;

/// Mixes a parent seed with a stream tag (splitmix64 finalizer).
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    let mut z = parent ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one run of a sweep, keyed by cell and fold.
pub fn run_seed(master: u64, cell: u64, fold: usize) -> u64 {
    derive_seed(derive_seed(master, cell.wrapping_add(1)), fold as u64 + 1)
}

/// Stable 64-bit key of a name (FNV-1a).
pub fn name_key(name: &str) -> u64 {
    name.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01B3)
    })
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
