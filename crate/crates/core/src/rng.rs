//! Deterministic seeded randomness.
//!
//! Every stochastic component draws from its own [`Stream`], derived from
//! a single root seed plus a purpose tag. Streams are single-owner: one
//! per worker, never shared, so parallel work stays reproducible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The deterministic random stream used throughout the crate.
///
/// ChaCha8 is seedable, portable across platforms, and serializable, so
/// a stream's state can be checkpointed and resumed mid-sequence.
pub type Stream = ChaCha8Rng;

/// Create a deterministic random stream from a 64-bit seed.
///
/// Identical seeds yield identical streams across runs and platforms.
pub fn seeded_rng(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive a sub-seed for a named purpose from a root seed.
///
/// FNV-1a over the tag bytes mixed with the root seed; stable across
/// runs, so each pipeline stage gets an independent but reproducible
/// stream.
pub fn derive_seed(root: u64, tag: &str) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET ^ root;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    // One more round over the root bytes so root=0 still mixes.
    for b in root.to_le_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Convenience: a stream for `tag` derived from `root`.
pub fn stream_for(root: u64, tag: &str) -> Stream {
    seeded_rng(derive_seed(root, tag))
}
