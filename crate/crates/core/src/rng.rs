//! Seed stream splitting.
//!
//! Every random draw in the crate comes from a ChaCha8 generator seeded with
//! `derive_seed(root, stream, index)`. Streams are independent by construction,
//! so any component (an episode reset, one mini-batch, one noise draw) can be
//! reproduced in isolation from the global seed and its index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    NetworkInit = 1,
    TrainReset = 2,
    Warmup = 3,
    Explore = 4,
    Batch = 5,
    TargetNoise = 6,
    SnapshotEval = 7,
    Evaluation = 8,
    Disturbance = 9,
    MonteCarlo = 10,
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for item `index` of `stream` under the root seed.
pub fn derive_seed(root: u64, stream: Stream, index: u64) -> u64 {
    mix64(mix64(mix64(root) ^ (stream as u64)) ^ index)
}

pub fn stream_rng(root: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, stream, index))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
