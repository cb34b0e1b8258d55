//! Seed derivation and random streams.
//!
//! Every stochastic operation takes either an explicit `u64` seed or a
//! `&mut StreamRng`. Child seeds are derived by hashing the parent seed with
//! a list of coordinates, so grid points and users get independent streams
//! regardless of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives a child seed from `base` and a coordinate path.
pub fn derive_seed(base: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(base), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

/// Opens the stream for `seed`.
pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Opens the stream for the child seed `derive_seed(base, coords)`.
pub fn substream(base: u64, coords: &[u64]) -> StreamRng {
    stream(derive_seed(base, coords))
}

/// Stable 64-bit tag for a short label, for use as a seed coordinate.
pub fn label(tag: &str) -> u64 {
    tag.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}
