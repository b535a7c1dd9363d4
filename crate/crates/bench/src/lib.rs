//! Shared workloads for the benchmarks.

use gridrisk_core::fixtures::{desk_fixture, DeskFixture, DeskOptions};
use gridrisk_core::surrogate::Dataset;
use gridrisk_core::{features_of, Realization};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The default desk system and schedule.
pub fn desk() -> DeskFixture {
    desk_fixture(&DeskOptions::default(), 7).expect("desk fixture")
}

/// Realization of the first base day at `step`.
pub fn realization(fx: &DeskFixture, step: usize) -> Realization {
    fx.base_days.scenarios[0][step].clone()
}

/// Rows with the desk feature layout and targets linear in the features,
/// enough to give trees and networks a realistic shape.
pub fn synthetic_dataset(fx: &DeskFixture, rows: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = features_of(&realization(fx, 200));
    let x: Vec<Vec<f64>> = (0..rows)
        .map(|_| base.iter().map(|v| v * rng.random_range(0.9..1.1)).collect())
        .collect();
    let y = x
        .iter()
        .map(|x| std::array::from_fn(|k| x.iter().skip(k).step_by(2).sum()))
        .collect();
    Dataset {
        hour: 0,
        x,
        y,
        scenario: (0..rows).collect(),
        train: (0..rows).collect(),
        test: Vec::new(),
    }
}
