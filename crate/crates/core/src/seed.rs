//! Deterministic derivation of per-purpose random streams from one seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent uses of randomness. Each gets its own ChaCha stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Data = 1,
    Split = 2,
    Init = 3,
    Batching = 4,
    Clustering = 5,
    Noise = 6,
}

pub fn rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream as u64);
    r
}

/// Further split a stream, e.g. one generator per restart or per sweep entry.
pub fn sub_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    r.set_stream(stream as u64);
    r
}
