//! Independent per-user random streams.
//!
//! Every (user, purpose) pair draws from its own ChaCha8 stream under the run
//! seed, so a user's arrivals and gains do not depend on how many other users
//! exist or in what order they are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Arrivals = 0,
    Gain = 1,
}

const PURPOSES: u64 = 2;

pub fn substream(seed: u64, user: usize, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PURPOSES * user as u64 + purpose as u64);
    rng
}
