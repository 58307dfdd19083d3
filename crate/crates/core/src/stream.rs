//! Seeded, splittable random streams and chunked parallel Monte Carlo.
//!
//! Work is cut into fixed-size chunks; chunk `c` draws from ChaCha8 stream
//! `c` of the master seed. Results are concatenated in chunk order, so the
//! output depends only on `(seed, draws)` and never on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type StreamRng = ChaCha8Rng;

/// Draws per chunk.
pub const CHUNK_SIZE: usize = 4096;

/// Default master seed.
pub const DEFAULT_SEED: u64 = 0xC0FFEE;

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a tag into a seed (splitmix64 finalizer) so unrelated uses of one
/// master seed get unrelated generators.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `op` inside a pool of `threads` workers, or the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, op: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(op()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::ThreadPool(e.to_string()))?;
            Ok(pool.install(op))
        }
    }
}

/// Calls `f(rng, count)` once per chunk and concatenates the outputs in
/// chunk order.
pub fn run_chunked<T, F>(seed: u64, draws: usize, threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut StreamRng, usize) -> Vec<T> + Sync + Send,
{
    let chunks = draws.div_ceil(CHUNK_SIZE);
    let parts = with_threads(threads, || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let count = CHUNK_SIZE.min(draws - c * CHUNK_SIZE);
                let mut rng = stream_rng(seed, c as u64);
                f(&mut rng, count)
            })
            .collect::<Vec<_>>()
    })?;
    Ok(parts.into_iter().flatten().collect())
}
