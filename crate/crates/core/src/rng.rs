//! Seeded random streams.
//!
//! Every stochastic step draws from a ChaCha20 generator keyed by a 64-bit
//! seed and an explicit stream number, so draws never depend on thread
//! scheduling or on how many values another step consumed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::digest::hash_u64;

/// Recorded in dataset manifests so consumers know how exogenous draws were made.
pub const PRNG_ID: &str = "chacha20:seed_from_u64+stream/v1";

pub const STREAM_NOISE: u64 = 0;
pub const STREAM_GROUNDING: u64 = 1;

pub fn stream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives an independent child seed from a parent seed and a label path.
pub fn derive_seed(seed: u64, labels: &[&str]) -> u64 {
    let seed_bytes = seed.to_le_bytes();
    let mut parts: Vec<&[u8]> = vec![&seed_bytes];
    parts.extend(labels.iter().map(|l| l.as_bytes()));
    hash_u64(&parts)
}

/// Uniform index in `0..n`. Goes through `u64` so the result does not depend
/// on the platform's pointer width.
pub fn uniform_index<R: Rng + ?Sized>(rng: &mut R, n: usize) -> usize {
    assert!(n > 0, "uniform_index over an empty range");
    rng.random_range(0..n as u64) as usize
}
