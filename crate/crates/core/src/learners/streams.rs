//! Independent random streams derived from one master seed.
//!
//! Each source of randomness has its own stream so that a method which skips
//! a draw (for example, never sampling the learner) leaves every other
//! stream untouched. This is what makes runs of different methods comparable
//! step for step at equal seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub(crate) enum Stream {
    Observation = 1,
    Dynamics,
    Action,
    Mix,
    Label,
    Respawn,
    Field,
    Init,
    Train,
    Command,
    Evaluation,
}

/// Generator for `(seed, stream, index)`; distinct triples give unrelated
/// streams.
pub(crate) fn stream_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// A derived seed, for generators that take a `u64`.
pub(crate) fn derived_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    use rand::RngCore;
    stream_rng(seed, stream, index).next_u64()
}
