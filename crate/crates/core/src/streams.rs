//! Named random streams derived from a run seed.
//!
//! Each consumer gets its own ChaCha stream so that, for example, evaluation
//! never shifts the sequence seen by training.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Init = 0,
    TrainSignals = 1,
    Actions = 2,
    Evaluation = 3,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
