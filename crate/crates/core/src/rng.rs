//! Seeded, splittable random streams.
//!
//! Every randomized routine takes an explicit generator. Independent
//! consumers derive their own stream from the same seed so that adding draws
//! in one place never shifts the draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream ids used inside the crate.
pub mod streams {
    pub const GENERATOR: u64 = 0;
    pub const ROUNDING: u64 = 1;
    pub const VOTER_SAMPLING: u64 = 2;
    pub const LEMMA_SWEEP: u64 = 3;
}

pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
