//! Seeded, splittable random streams.
//!
//! Every consumer derives its own ChaCha stream from `(seed, stream)` so runs
//! replay identically regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream `stream` of the generator seeded with `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Packs a few small indices into one stream id.
pub fn stream_id(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0xcbf2_9ce4_8422_2325u64, |acc, &p| {
            (acc ^ p).wrapping_mul(0x0000_0100_0000_01b3)
        })
}
