//! Deterministic random streams.
//!
//! Every stochastic pipeline derives one independent ChaCha stream per
//! sample (or trial) from a master seed and the sample index, so results do
//! not depend on how samples are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

/// Stream number `index` of the master `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A secondary stream family for the same seed, used when one pipeline needs
/// several independent families (e.g. retries, auxiliary draws).
pub fn substream(seed: u64, family: u64, index: u64) -> StreamRng {
    let mixed = seed ^ family.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    stream(mixed, index)
}
