//! Seeded randomness.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded through
//! `SeedableRng::seed_from_u64`. ChaCha output is specified bit-for-bit, so
//! splits, simulated datasets and benchmark cells reproduce across platforms.
//! Sub-seeds are derived with SplitMix64, and normal deviates use the
//! Box–Muller cosine branch (one normal per two uniforms).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One SplitMix64 output step for state `z`.
pub fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable hash of `base` and an ordered list of tags.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Uniform draw on `[0, 1)`.
pub fn uniform(rng: &mut impl Rng) -> f64 {
    rng.random::<f64>()
}

/// Standard normal draw via Box–Muller.
pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    // 1 - U lies in (0, 1], keeping the log finite.
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
