//! Seed derivation.
//!
//! A run owns one master seed. Every stochastic behaviour draws from its own
//! ChaCha substream so that switching one behaviour off (for an ablation)
//! leaves the draws of every other behaviour untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random substreams derived from a master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Episode reset jitter and per-episode environment seeds.
    Env = 1,
    /// Network weight initialization.
    MemberInit = 2,
    /// Bootstrap resampling and minibatch shuffling during fits.
    Shuffle = 3,
    /// Per-decision CEM sampling seeds.
    Planner = 4,
    /// Uniform random actions (warmup and the random-policy ablation).
    RandomPolicy = 5,
}

/// RNG for one substream of `master`.
pub fn stream_rng(master: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream as u64);
    rng
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic child seed for item `index` of `stream` under `master`.
pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    mix64(mix64(master ^ mix64(stream as u64)) ^ index)
}
