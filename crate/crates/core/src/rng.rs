//! Seeded, splittable random streams.
//!
//! Every random quantity in a run is drawn from its own ChaCha8 stream keyed
//! by the run seed and a stream id, so adding draws to one stage never shifts
//! another stage's numbers, and per-column work can run in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream namespaces. The id passed to [`stream_rng`] is `kind << 40 | index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamKind {
    Latent = 1,
    Field = 2,
    Noise = 3,
    Anchors = 4,
    Shuffle = 5,
    Split = 6,
    Subsample = 7,
    Mixture = 8,
}

impl StreamKind {
    pub fn id(self, index: u64) -> u64 {
        ((self as u64) << 40) | (index & ((1 << 40) - 1))
    }
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn kind_rng(seed: u64, kind: StreamKind, index: u64) -> ChaCha8Rng {
    stream_rng(seed, kind.id(index))
}
