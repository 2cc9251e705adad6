//! Seeded input generators shared by the benchmark targets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trackeval_core::{CostMatrix, KinematicState, LabeledState};

/// Seeded generator so every run benchmarks identical inputs.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense cost matrix with entries in `[0, 100)`.
pub fn random_cost_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CostMatrix {
    CostMatrix::from_fn(rows, cols, |_, _| rng.random_range(0.0..100.0))
        .expect("finite costs are valid")
}

/// Labeled set with distinct labels and positions in a 1000 px box.
pub fn random_labeled_set(rng: &mut ChaCha8Rng, size: usize) -> Vec<LabeledState> {
    (0..size)
        .map(|i| {
            let x = rng.random_range(0.0..1000.0);
            let y = rng.random_range(0.0..1000.0);
            LabeledState::new(i as u32 + 1, KinematicState::at(x, y))
        })
        .collect()
}
