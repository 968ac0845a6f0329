//! Input builders shared by the benchmarks.

use flmon_core::data::gen_blobs;
use flmon_core::{Dataset, ParamVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` update-sized vectors with entries uniform in `[-1, 1]`.
pub fn random_updates(n: usize, d: usize, seed: u64) -> Vec<ParamVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| ParamVector::new((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect()
}

/// A 10-class blob set shaped like the default experiment.
pub fn blobs(rows: usize, dim: usize) -> Dataset {
    gen_blobs(10, dim, rows.div_ceil(10), 0.8, 7).expect("valid blob parameters")
}
