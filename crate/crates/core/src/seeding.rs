//! Deterministic derivation of independent rng streams.
//!
//! Every stochastic consumer (episode start, sensor noise, policy sampling,
//! minibatch draws) gets its own generator keyed by `(seed, stream, index)`,
//! so a run can be resumed from counters alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type DetRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Scenario = 1,
    EpisodeStart = 2,
    Sensor = 3,
    Rollout = 4,
    Update = 5,
    Init = 6,
    Eval = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stream as u64) ^ index)
}

pub fn rng_for(seed: u64, stream: Stream, index: u64) -> DetRng {
    DetRng::seed_from_u64(derive_seed(seed, stream, index))
}
