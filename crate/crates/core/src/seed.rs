//! Counter-based seed derivation.
//!
//! Every random decision in the crate flows from a named base seed
//! (task / curation / train / eval) through [`derive`], which mixes the
//! base with a list of integer tags (stream id, step, slot, ...). This
//! keeps independent streams independent and makes every run replayable
//! from its manifest.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; a full-period mixer over u64.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a base seed and a tag path.
///
/// The same (base, tags) always yields the same child; distinct tag paths
/// yield decorrelated children.
pub fn derive(base: u64, tags: &[u64]) -> u64 {
    let mut acc = splitmix64(base);
    for &t in tags {
        acc = splitmix64(acc ^ splitmix64(t));
    }
    acc
}

/// A seeded, platform-independent RNG for the given seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream tags used by the trainer and curation pipelines.
pub mod stream {
    /// Per-step query sampling.
    pub const QUERIES: u64 = 1;
    /// Per-(step, slot) rollout generation.
    pub const ROLLOUT: u64 = 2;
    /// Per-(step, slot) replacement decisions.
    pub const REPLACE: u64 = 3;
    /// Per-step validation evaluation.
    pub const VALIDATE: u64 = 4;
    /// Per-(teacher, query) curation sampling.
    pub const CURATE: u64 = 5;
    /// Per-query evaluation sampling.
    pub const EVAL: u64 = 6;
}
