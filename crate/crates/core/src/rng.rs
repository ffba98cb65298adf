//! Reproducible random streams.
//!
//! Every stochastic routine draws from a stream keyed by `(seed, index)`.
//! The key is mixed with SplitMix64 (a counter-based hash) into the 64-bit
//! seed of a ChaCha8 generator, so replicate `i` of run `seed` sees the same
//! numbers regardless of which thread executes it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed of sub-stream `index` of `seed`.
pub fn split_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(index.wrapping_add(0x6A09_E667_F3BC_C909)))
}

pub fn rng_from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, index: u64) -> StreamRng {
    rng_from_seed(split_seed(seed, index))
}

/// Run `f` once per replicate in parallel and return the results in replicate
/// order. Each call receives the replicate index and its derived seed.
pub fn replicate_map<T, F>(seed: u64, replicates: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync + Send,
{
    (0..replicates as u64)
        .into_par_iter()
        .map(|i| f(i, split_seed(seed, i)))
        .collect()
}
