//! Per-hour training sets assembled from simulation corpora.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::grid_model::{features_of, HOURS_PER_DAY, STEPS_PER_DAY, STEPS_PER_HOUR};
use crate::risk::QoiMatrix;
use crate::scenarios::{rng_from_seed, ScenarioSet};

/// Scenario inputs with their simulated QoIs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationCorpus {
    pub scenarios: ScenarioSet,
    pub qoi: QoiMatrix,
}

impl SimulationCorpus {
    pub fn new(scenarios: ScenarioSet, qoi: QoiMatrix) -> Result<Self> {
        if qoi.n_scenarios() != scenarios.len() {
            return Err(Error::Dimension {
                what: "corpus scenarios",
                expected: scenarios.len(),
                found: qoi.n_scenarios(),
            });
        }
        if qoi.n_steps() != scenarios.horizon() {
            return Err(Error::Dimension {
                what: "corpus steps",
                expected: scenarios.horizon(),
                found: qoi.n_steps(),
            });
        }
        Ok(SimulationCorpus { scenarios, qoi })
    }
}

/// Rows of one hour: features, targets, and a train/test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub hour: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<[f64; 4]>,
    /// Source scenario of each row; augmented rows use `usize::MAX`.
    pub scenario: Vec<usize>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Dataset {
    pub fn n_features(&self) -> usize {
        self.x.first().map_or(0, |r| r.len())
    }

    pub fn is_augmented(&self, row: usize) -> bool {
        self.scenario[row] == usize::MAX
    }

    /// Dataset whose rows all belong to the train split.
    pub fn train_only(hour: usize, x: Vec<Vec<f64>>, y: Vec<[f64; 4]>) -> Self {
        let n = x.len();
        Dataset {
            hour,
            x,
            y,
            scenario: (0..n).collect(),
            train: (0..n).collect(),
            test: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetOptions {
    pub train_fraction: f64,
    pub seed: u64,
    pub min_scenarios: usize,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            train_fraction: 0.7,
            seed: 0,
            min_scenarios: 100,
        }
    }
}

/// Scenario-level split: `round(fraction * n)` scenario ids for training.
pub fn split_scenarios(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng_from_seed(seed));
    let n_train = ((fraction * n as f64).round() as usize).min(n);
    let mut train = ids[..n_train].to_vec();
    let mut test = ids[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Builds the 24 hourly datasets. Rows of hour `h` pool its 12 steps across
/// scenarios; the split is by scenario id so no scenario contributes to both
/// sides, and augmented rows only ever join the train split.
pub fn build_datasets(
    corpus: &SimulationCorpus,
    augmented: Option<&SimulationCorpus>,
    options: &DatasetOptions,
) -> Result<Vec<Dataset>> {
    check_corpus(corpus, options.min_scenarios)?;
    if let Some(aug) = augmented {
        check_corpus(aug, 0)?;
        if aug.scenarios.zones != corpus.scenarios.zones {
            return Err(Error::Validation("augmented corpus has a different zone set".into()));
        }
    }
    let n = corpus.scenarios.len();
    let (train_ids, _) = split_scenarios(n, options.train_fraction, options.seed);
    let mut is_train = vec![false; n];
    for &i in &train_ids {
        is_train[i] = true;
    }
    let mut out = Vec::with_capacity(HOURS_PER_DAY);
    for hour in 0..HOURS_PER_DAY {
        let steps = hour * STEPS_PER_HOUR..(hour + 1) * STEPS_PER_HOUR;
        let mut ds = Dataset {
            hour,
            x: Vec::new(),
            y: Vec::new(),
            scenario: Vec::new(),
            train: Vec::new(),
            test: Vec::new(),
        };
        for i in 0..n {
            for t in steps.clone() {
                let row = ds.x.len();
                ds.x.push(features_of(&corpus.scenarios.scenarios[i][t]));
                ds.y.push(corpus.qoi.get(i, t).to_array());
                ds.scenario.push(i);
                if is_train[i] {
                    ds.train.push(row);
                } else {
                    ds.test.push(row);
                }
            }
        }
        if let Some(aug) = augmented {
            for i in 0..aug.scenarios.len() {
                for t in steps.clone() {
                    let row = ds.x.len();
                    ds.x.push(features_of(&aug.scenarios.scenarios[i][t]));
                    ds.y.push(aug.qoi.get(i, t).to_array());
                    ds.scenario.push(usize::MAX);
                    ds.train.push(row);
                }
            }
        }
        out.push(ds);
    }
    Ok(out)
}

fn check_corpus(corpus: &SimulationCorpus, min_scenarios: usize) -> Result<()> {
    if corpus.scenarios.horizon() != STEPS_PER_DAY {
        return Err(Error::Validation(format!(
            "corpus covers {} steps, expected {STEPS_PER_DAY}",
            corpus.scenarios.horizon()
        )));
    }
    if corpus.scenarios.len() < min_scenarios {
        return Err(Error::Precondition(format!(
            "corpus has {} scenarios, need at least {min_scenarios}",
            corpus.scenarios.len()
        )));
    }
    Ok(())
}
