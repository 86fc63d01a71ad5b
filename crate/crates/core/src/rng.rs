//! Per-trial random streams.
//!
//! Trial `i` of a run seeded with `s` draws from a ChaCha8 generator keyed by
//! `mix_seed(s, i)`:
//!
//! ```text
//! mix_seed(s, i) = splitmix64(splitmix64(s) ^ (i * 0xD1B5_4A32_D192_ED03))
//! ```
//!
//! Both `splitmix64` and multiplication by an odd constant are bijections on
//! `u64`, so distinct trial indices of one seed never share a key. Because
//! the stream depends on nothing but `(seed, index)`, results are identical
//! for any scheduling of trials across workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type TrialStream = ChaCha8Rng;

const INDEX_MULTIPLIER: u64 = 0xD1B5_4A32_D192_ED03;
const POINT_DOMAIN: u64 = 0x6761_7067_6175_6765;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index.wrapping_mul(INDEX_MULTIPLIER))
}

pub fn derive_trial_stream(seed: u64, trial_index: u64) -> TrialStream {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, trial_index))
}

/// Seed for the `k`-th point of a sweep, kept in a separate domain from
/// trial keys.
pub fn derive_point_seed(seed: u64, point_index: u64) -> u64 {
    mix_seed(seed ^ POINT_DOMAIN, point_index)
}

/// Uniform draw on `[lo, hi]` as `lo + (hi - lo) * u` with `u` in `[0, 1)`.
pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
