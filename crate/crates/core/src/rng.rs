//! Seeded, stream-split random number generation.
//!
//! Every consumer derives its generator from an explicit `(seed, stream)`
//! pair, so results never depend on thread count or scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for `stream` under `seed`. Distinct streams are independent
/// keystreams of the same ChaCha key.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) const POTENTIAL_STREAM: u64 = 0;
pub(crate) const LANCZOS_STREAM: u64 = 1;
/// Monte Carlo chunks use `MC_STREAM_BASE + chunk index`.
pub(crate) const MC_STREAM_BASE: u64 = 1 << 32;
