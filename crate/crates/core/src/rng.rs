//! Named random streams derived from a single run seed.
//!
//! Every consumer of randomness gets its own ChaCha stream so that adding
//! draws in one place never shifts the sequence seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Shuffle = 2,
    Negatives = 3,
    Recommender = 4,
    Synthetic = 5,
    RecommenderTrain = 6,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// Sub-stream for worker `index` of a parallel run; never collides with the named streams.
pub fn worker_stream(seed: u64, epoch: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((epoch as u64) << 32));
    rng.set_stream(1_000 + index as u64);
    rng
}
