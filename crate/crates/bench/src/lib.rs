//! Shared data generation for the benchmark targets.

use causal_order::{generate_chain, ChainSpec, ConfounderPreset, DataMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent uniform columns.
pub fn iid_columns(p: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p)
        .map(|_| (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
        .collect()
}

/// A synthetic causal chain, optionally confounded.
pub fn chain(p: usize, n: usize, preset: ConfounderPreset, seed: u64) -> DataMatrix {
    let spec = ChainSpec::new(p, n, seed).with_preset(preset);
    generate_chain(&spec).expect("valid spec").0
}
