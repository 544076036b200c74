//! Seeded random streams.
//!
//! Each consumer of randomness (environment noise, each learner's
//! exploration and replay sampling) owns an independent ChaCha stream
//! derived from one experiment seed, so runs are a pure function of
//! (config, seed) regardless of how the streams interleave.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream identifiers used by the simulation and trainers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Environment = 1,
    AvLearner = 2,
    AttackerLearner = 3,
    Init = 4,
    Evaluation = 5,
}

pub fn stream(seed: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
