//! Counter-based random substreams.
//!
//! Every random decision in a run draws from a generator keyed by
//! `(master seed, purpose, worker, round)`, so results do not depend on the
//! order in which workers are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for. Distinct purposes never share a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    Init = 1,
    Role = 2,
    Fabrication = 3,
    LocalTraining = 4,
    Sampling = 5,
    Data = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes the key into a single 64-bit seed.
pub fn derive_seed(master: u64, purpose: Purpose, worker: u64, round: u64) -> u64 {
    let mut h = splitmix64(master);
    h = splitmix64(h ^ purpose as u64);
    h = splitmix64(h ^ worker);
    splitmix64(h ^ round)
}

pub fn substream(master: u64, purpose: Purpose, worker: u64, round: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, purpose, worker, round))
}
