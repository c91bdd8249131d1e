//! Seeded, stream-splittable randomness.
//!
//! Every Monte Carlo computation is cut into fixed-size chunks; chunk `i`
//! draws from ChaCha8 stream `i` of the run seed. Results therefore do not
//! depend on how many threads process the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Generator identity echoed into reports.
pub const RNG_NAME: &str = "ChaCha8Rng/rand_chacha-0.9";

/// Samples per Monte Carlo chunk.
pub const CHUNK: u64 = 1 << 14;

pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a seed with a label so derived streams do not collide.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `n` trials split into chunks and reduces the per-chunk outputs in
/// chunk order.
///
/// `work(rng, m)` must perform exactly `m` trials with the given generator.
pub fn chunked<T, F, R>(n: u64, seed: u64, work: F, reduce: R, init: T) -> T
where
    T: Send,
    F: Fn(&mut Rng, u64) -> T + Sync,
    R: Fn(T, T) -> T,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let m = CHUNK.min(n - i * CHUNK);
            let mut rng = stream(seed, i);
            work(&mut rng, m)
        })
        .collect();
    parts.into_iter().fold(init, reduce)
}
