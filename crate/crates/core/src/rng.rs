//! Random-number generator selection and per-pixel seed derivation.
//!
//! Every chain owns a `ChaCha8Rng` seeded through `SeedableRng::seed_from_u64`.
//! Brick fits derive one seed per pixel from the base seed and the pixel's
//! row-major index, so the stream a pixel sees does not depend on which
//! worker runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every chain and simulation.
pub type ChainRng = ChaCha8Rng;

/// Recorded in output metadata so chains can be reproduced elsewhere.
pub const GENERATOR_FAMILY: &str = "ChaCha8Rng (rand_chacha 0.9, SeedableRng::seed_from_u64)";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the pixel at (`row`, `col`) in a grid with `cols` columns:
///
/// ```text
/// index = row * cols + col
/// seed  = mix64(base + (index + 1) * 0x9E3779B97F4A7C15)   (wrapping u64)
/// ```
pub fn pixel_seed(base: u64, row: usize, col: usize, cols: usize) -> u64 {
    let index = (row as u64)
        .wrapping_mul(cols as u64)
        .wrapping_add(col as u64);
    mix64(base.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn chain_rng(seed: u64) -> ChainRng {
    ChainRng::seed_from_u64(seed)
}
