//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 generator (`rand_chacha` 0.9) keyed by a 64-bit
//! seed and addressed by a 64-bit stream id. ChaCha is counter based, so
//! stream `k` of seed `s` yields the same words on every platform and no
//! matter which thread draws it. Nested streams (replication `r`, then
//! bootstrap draw `b` inside it) derive child seeds with SplitMix64.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` under `seed`.
pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Child seed for a tagged sub-computation.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
