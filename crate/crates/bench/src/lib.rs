//! Corpora shared by the benchmarks.

use lfsgg_core::synth::{generate, SynthConfig, SyntheticPair};

/// Noisy pairs with 30 to 40 instances and 60 to 100 quintuples each.
pub fn large_pairs(n: usize) -> Vec<SyntheticPair> {
    generate(&SynthConfig {
        seed: 17,
        n_images: n,
        nodes_per_image: (30, 40),
        quintuples_per_image: (60, 100),
        edge_drop: 0.2,
        edge_add: 0.1,
        label_noise: 0.05,
        ..SynthConfig::default()
    })
    .expect("valid config")
}

/// Noisy pairs small enough for the exhaustive matcher.
pub fn small_pairs(n: usize) -> Vec<SyntheticPair> {
    generate(&SynthConfig {
        seed: 23,
        n_images: n,
        edge_drop: 0.2,
        edge_add: 0.1,
        ..SynthConfig::default()
    })
    .expect("valid config")
}
