//! Sampling-based risk assessment: forward propagation of scenarios through
//! an evaluator (the dispatch LP chain or a trained surrogate) and the three
//! levels of risk metrics computed from the resulting QoI samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_model::{CommitmentSchedule, Realization, SystemModel, Trajectory};
use crate::scenarios::{Provenance, ScenarioSet};
use crate::sced::{self, DispatchState, QoiKind, QoiSample};

/// Which side of a threshold is adverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Values below the threshold are adverse (reserves).
    Below,
    /// Values above the threshold are adverse (load shed).
    Above,
}

impl Direction {
    /// Strict violation, as counted by the adverse-event probability.
    pub fn violates(self, q: f64, qbar: f64) -> bool {
        match self {
            Direction::Below => q < qbar,
            Direction::Above => q > qbar,
        }
    }
}

/// Which tail the conditional expectation averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Lower,
    Upper,
}

/// `N x T x 4` QoI samples with per-scenario weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QoiMatrix {
    n: usize,
    t: usize,
    values: Vec<QoiSample>,
    pub weights: Vec<f64>,
}

impl QoiMatrix {
    pub fn from_rows(rows: Vec<Vec<QoiSample>>, weights: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        let t = rows.first().map_or(0, |r| r.len());
        if weights.len() != n {
            return Err(Error::Dimension {
                what: "QoI matrix weights",
                expected: n,
                found: weights.len(),
            });
        }
        let mut values = Vec::with_capacity(n * t);
        for r in rows {
            if r.len() != t {
                return Err(Error::Dimension {
                    what: "QoI matrix steps",
                    expected: t,
                    found: r.len(),
                });
            }
            values.extend(r);
        }
        if n > 0 {
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > 1e-9 || weights.iter().any(|w| *w < 0.0) {
                return Err(Error::Validation(format!(
                    "QoI matrix weights must be nonnegative and sum to 1 (got {total})"
                )));
            }
        }
        Ok(QoiMatrix {
            n,
            t,
            values,
            weights,
        })
    }

    pub fn n_scenarios(&self) -> usize {
        self.n
    }

    pub fn n_steps(&self) -> usize {
        self.t
    }

    pub fn get(&self, scenario: usize, step: usize) -> QoiSample {
        self.values[scenario * self.t + step]
    }

    pub fn row(&self, scenario: usize) -> &[QoiSample] {
        &self.values[scenario * self.t..(scenario + 1) * self.t]
    }

    /// Samples of one QoI at one step across scenarios.
    pub fn column(&self, step: usize, kind: QoiKind) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, step).get(kind)).collect()
    }
}

/// Largest block handed to [`Evaluator::evaluate_block`].
const MAX_BLOCK: usize = 256;

/// Maps one scenario trajectory to its QoI trajectory.
pub trait Evaluator: Sync {
    fn kind(&self) -> &'static str;

    /// `trajectory[0]` is step `start_step` of the day; `initial` is the
    /// dispatch just before it.
    fn evaluate(
        &self,
        trajectory: &[Realization],
        start_step: usize,
        initial: &DispatchState,
    ) -> Result<Vec<QoiSample>>;

    /// Evaluates a contiguous block of scenarios whose first member has
    /// index `first` in the full set. Evaluators that predict many rows at
    /// once override this; the default evaluates one trajectory at a time.
    fn evaluate_block(
        &self,
        trajectories: &[Trajectory],
        first: usize,
        start_step: usize,
        initial: &DispatchState,
    ) -> Result<Vec<Vec<QoiSample>>> {
        trajectories
            .iter()
            .enumerate()
            .map(|(i, t)| {
                self.evaluate(t, start_step, initial)
                    .map_err(|e| e.in_scenario(first + i))
            })
            .collect()
    }
}

/// The optimization-based evaluator: chained dispatch LPs.
pub struct OracleEvaluator<'a> {
    pub system: &'a SystemModel,
    pub schedule: &'a CommitmentSchedule,
}

impl Evaluator for OracleEvaluator<'_> {
    fn kind(&self) -> &'static str {
        "oracle"
    }

    fn evaluate(
        &self,
        trajectory: &[Realization],
        start_step: usize,
        initial: &DispatchState,
    ) -> Result<Vec<QoiSample>> {
        Ok(sced::simulate_from(self.system, self.schedule, start_step, initial, trajectory, false)?.qoi)
    }
}

/// Runs every scenario through `evaluator` on a pool of `parallelism`
/// workers. Rows are written by scenario index, so the result does not
/// depend on scheduling. Augmented (training-only) sets are rejected.
pub fn propagate(
    evaluator: &dyn Evaluator,
    scenarios: &ScenarioSet,
    start_step: usize,
    initial: &DispatchState,
    parallelism: usize,
) -> Result<QoiMatrix> {
    if scenarios.provenance == Provenance::Augmented {
        return Err(Error::Precondition(
            "augmented scenarios are training-only and cannot be used for risk estimation".into(),
        ));
    }
    evaluate_all(evaluator, scenarios, start_step, initial, parallelism)
}

/// Like [`propagate`] but accepts any provenance; used to build training
/// corpora.
pub fn evaluate_all(
    evaluator: &dyn Evaluator,
    scenarios: &ScenarioSet,
    start_step: usize,
    initial: &DispatchState,
    parallelism: usize,
) -> Result<QoiMatrix> {
    if scenarios.is_empty() {
        return Err(Error::Precondition("scenario set is empty".into()));
    }
    let n = scenarios.len();
    let workers = parallelism.max(1);
    // Several blocks per worker keeps the pool balanced.
    let block = n.div_ceil(workers * 4).clamp(1, MAX_BLOCK);
    let starts: Vec<usize> = (0..n).step_by(block).collect();
    let run = |&first: &usize| {
        let end = (first + block).min(n);
        evaluator.evaluate_block(&scenarios.scenarios[first..end], first, start_step, initial)
    };
    let blocks: Vec<Result<Vec<Vec<QoiSample>>>> = if workers == 1 {
        starts.iter().map(run).collect()
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
        pool.install(|| starts.par_iter().map(run).collect())
    };
    let mut rows = Vec::with_capacity(n);
    for b in blocks {
        rows.extend(b?);
    }
    QoiMatrix::from_rows(rows, scenarios.weights.clone())
}

fn check_samples(samples: &[f64], weights: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Precondition("no samples".into()));
    }
    if samples.len() != weights.len() {
        return Err(Error::Dimension {
            what: "sample weights",
            expected: samples.len(),
            found: weights.len(),
        });
    }
    Ok(())
}

/// Level 1: conditional expectation over the worst `alpha` percent.
///
/// Samples are ordered from worst to best (ascending for [`Tail::Lower`]) and
/// accumulated until their weight reaches `alpha / 100`; the result is the
/// weighted mean of those samples. With uniform weights this is the mean of
/// the worst `ceil(alpha N / 100)` samples, i.e. everything up to the
/// nearest-rank percentile.
pub fn level1(samples: &[f64], weights: &[f64], alpha: f64, tail: Tail) -> Result<f64> {
    check_samples(samples, weights)?;
    if !(alpha > 0.0 && alpha <= 100.0) {
        return Err(Error::Precondition(format!("alpha {alpha} must lie in (0, 100]")));
    }
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    match tail {
        Tail::Lower => idx.sort_by(|&a, &b| samples[a].total_cmp(&samples[b])),
        Tail::Upper => idx.sort_by(|&a, &b| samples[b].total_cmp(&samples[a])),
    }
    let target = alpha / 100.0;
    let mut acc_w = 0.0;
    let mut acc = 0.0;
    for &i in &idx {
        acc_w += weights[i];
        acc += weights[i] * samples[i];
        if acc_w >= target - 1e-12 {
            break;
        }
    }
    Ok(acc / acc_w)
}

/// Level 2: weighted probability of a strict threshold violation.
pub fn level2(samples: &[f64], weights: &[f64], qbar: f64, direction: Direction) -> Result<f64> {
    check_samples(samples, weights)?;
    Ok(samples
        .iter()
        .zip(weights)
        .filter(|(q, _)| direction.violates(**q, qbar))
        // fold from +0 so an empty sum is not -0
        .fold(0.0, |acc, (_, w)| acc + w)
        .clamp(0.0, 1.0))
}

/// Level 3: expected consequence cost.
pub fn level3(samples: &[f64], weights: &[f64], consequence: impl Fn(f64) -> f64) -> Result<f64> {
    check_samples(samples, weights)?;
    Ok(samples
        .iter()
        .zip(weights)
        .map(|(q, w)| w * consequence(*q))
        .sum())
}

/// Consequence of a reserve shortfall: `voll * max(qbar - q, 0)`.
pub fn reserve_shortfall_consequence(voll: f64, qbar: f64) -> impl Fn(f64) -> f64 {
    move |q| voll * (qbar - q).max(0.0)
}

/// Consequence of load shedding: `voll * q`.
pub fn load_shed_consequence(voll: f64) -> impl Fn(f64) -> f64 {
    move |q| voll * q.max(0.0)
}

/// Threshold and adverse direction for each QoI; cost has none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoiThresholds {
    pub per_qoi: [Option<(f64, Direction)>; 4],
}

impl QoiThresholds {
    pub fn from_system(system: &SystemModel) -> Self {
        let mut per_qoi = [None; 4];
        per_qoi[QoiKind::LoadShed.index()] = Some((0.0, Direction::Above));
        per_qoi[QoiKind::RegReserve.index()] = Some((system.mrr_reg, Direction::Below));
        per_qoi[QoiKind::OpReserve.index()] = Some((system.mrr_op, Direction::Below));
        QoiThresholds { per_qoi }
    }

    pub fn get(&self, kind: QoiKind) -> Option<(f64, Direction)> {
        self.per_qoi[kind.index()]
    }
}

/// Tail used for the level-1 metric of each QoI: low reserves are adverse,
/// high cost and high shed are adverse.
pub fn adverse_tail(kind: QoiKind) -> Tail {
    match kind {
        QoiKind::RegReserve | QoiKind::OpReserve => Tail::Lower,
        QoiKind::Cost | QoiKind::LoadShed => Tail::Upper,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoiRisk {
    pub level1: f64,
    pub level2: Option<f64>,
    pub level3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskProfile {
    pub alpha: f64,
    pub voll: f64,
    pub thresholds: QoiThresholds,
    /// First step of the profile within the day.
    pub start_step: usize,
    /// `steps[t][qoi]`
    pub steps: Vec<[QoiRisk; 4]>,
}

impl RiskProfile {
    pub fn get(&self, step: usize, kind: QoiKind) -> QoiRisk {
        self.steps[step][kind.index()]
    }

    pub fn level3_series(&self, kind: QoiKind) -> Vec<f64> {
        self.steps
            .iter()
            .map(|s| s[kind.index()].level3.unwrap_or(0.0))
            .collect()
    }
}

/// Applies the three metric levels to every step and QoI.
pub fn risk_profile(qoi: &QoiMatrix, system: &SystemModel, alpha: f64) -> Result<RiskProfile> {
    risk_profile_at(qoi, system, alpha, 0)
}

pub fn risk_profile_at(
    qoi: &QoiMatrix,
    system: &SystemModel,
    alpha: f64,
    start_step: usize,
) -> Result<RiskProfile> {
    let thresholds = QoiThresholds::from_system(system);
    let voll = system.voll;
    let w = &qoi.weights;
    let mut steps = Vec::with_capacity(qoi.n_steps());
    for t in 0..qoi.n_steps() {
        let mut row = [QoiRisk {
            level1: 0.0,
            level2: None,
            level3: None,
        }; 4];
        for kind in QoiKind::ALL {
            let samples = qoi.column(t, kind);
            let mut r = QoiRisk {
                level1: level1(&samples, w, alpha, adverse_tail(kind))?,
                level2: None,
                level3: None,
            };
            if let Some((qbar, dir)) = thresholds.get(kind) {
                r.level2 = Some(level2(&samples, w, qbar, dir)?);
                r.level3 = Some(match kind {
                    QoiKind::LoadShed => level3(&samples, w, load_shed_consequence(voll))?,
                    _ => level3(&samples, w, reserve_shortfall_consequence(voll, qbar))?,
                });
            }
            row[kind.index()] = r;
        }
        steps.push(row);
    }
    Ok(RiskProfile {
        alpha,
        voll,
        thresholds,
        start_step,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> Vec<f64> {
        vec![1.0 / n as f64; n]
    }

    /// Sort-based reference: mean of the worst ceil(alpha N / 100) samples.
    fn level1_sorted(samples: &[f64], alpha: f64) -> f64 {
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let k = ((alpha * s.len() as f64 / 100.0) - 1e-9).ceil().max(1.0) as usize;
        s[..k].iter().sum::<f64>() / k as f64
    }

    #[test]
    fn level1_examples() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(level1(&s, &uniform(4), 50.0, Tail::Lower).unwrap(), 1.5);
        assert_eq!(level1(&s, &uniform(4), 100.0, Tail::Lower).unwrap(), 2.5);
        assert_eq!(level1(&s, &uniform(4), 25.0, Tail::Upper).unwrap(), 4.0);
        assert!(level1(&s, &uniform(4), 0.0, Tail::Lower).is_err());
        assert!(level1(&[], &[], 5.0, Tail::Lower).is_err());
    }

    #[test]
    fn level1_ties_match_sort_reference() {
        let s = [3.0, 1.0, 1.0, 1.0, 2.0, 5.0, 1.0];
        for alpha in [5.0, 10.0, 20.0, 33.0, 50.0, 70.0, 100.0] {
            let got = level1(&s, &uniform(s.len()), alpha, Tail::Lower).unwrap();
            assert!((got - level1_sorted(&s, alpha)).abs() < 1e-12, "alpha {alpha}");
        }
    }

    #[test]
    fn level2_examples() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(level2(&s, &uniform(4), 2.5, Direction::Below).unwrap(), 0.5);
        assert_eq!(level2(&[2.5; 4], &uniform(4), 2.5, Direction::Below).unwrap(), 0.0);
        let shed = [0.0, 0.0, 5.0];
        let p = level2(&shed, &uniform(3), 0.0, Direction::Above).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn level3_examples() {
        let c = reserve_shortfall_consequence(3500.0, 2250.0);
        assert_eq!(level3(&[2000.0, 2500.0], &uniform(2), &c).unwrap(), 437_500.0);
        assert_eq!(level3(&[3000.0, 2500.0], &uniform(2), &c).unwrap(), 0.0);
        let shed = load_shed_consequence(3500.0);
        assert_eq!(level3(&[0.0, 2.0], &uniform(2), shed).unwrap(), 3500.0);
    }

    #[test]
    fn augmented_sets_are_rejected() {
        struct Never;
        impl Evaluator for Never {
            fn kind(&self) -> &'static str {
                "never"
            }
            fn evaluate(&self, _: &[Realization], _: usize, _: &DispatchState) -> Result<Vec<QoiSample>> {
                unreachable!()
            }
        }
        let set = ScenarioSet {
            zones: vec!["A".into()],
            scenarios: vec![vec![Realization::zeros(1)]],
            weights: vec![1.0],
            provenance: Provenance::Augmented,
            seed: 0,
        };
        let err = propagate(&Never, &set, 0, &DispatchState::zeros(1), 1).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn level1_matches_sort_reference(
                s in proptest::collection::vec(-50i32..50, 1..60),
                alpha in 1.0f64..100.0,
            ) {
                let s: Vec<f64> = s.into_iter().map(f64::from).collect();
                let got = level1(&s, &uniform(s.len()), alpha, Tail::Lower).unwrap();
                prop_assert!((got - level1_sorted(&s, alpha)).abs() < 1e-9);
                let mean = level1(&s, &uniform(s.len()), 100.0, Tail::Lower).unwrap();
                prop_assert!(got <= mean + 1e-9);
            }

            #[test]
            fn level2_is_a_probability_and_ignores_threshold_samples(
                s in proptest::collection::vec(0.0f64..100.0, 1..40),
                qbar in 0.0f64..100.0,
            ) {
                let n = s.len();
                let p = level2(&s, &uniform(n), qbar, Direction::Below).unwrap();
                prop_assert!((0.0..=1.0).contains(&p));
                let mut t = s.clone();
                t.push(qbar);
                let p2 = level2(&t, &uniform(n + 1), qbar, Direction::Below).unwrap();
                // Same violating count over one more sample.
                prop_assert!((p2 * (n + 1) as f64 - p * n as f64).abs() < 1e-9);
            }

            #[test]
            fn level3_scales(
                s in proptest::collection::vec(0.0f64..5000.0, 1..40),
                qbar in 0.0f64..5000.0,
                c in 0.1f64..10.0,
                voll in 1.0f64..5000.0,
            ) {
                let w = uniform(s.len());
                let base = level3(&s, &w, reserve_shortfall_consequence(voll, qbar)).unwrap();
                let scaled: Vec<f64> = s.iter().map(|v| v * c).collect();
                let r = level3(&scaled, &w, reserve_shortfall_consequence(voll, qbar * c)).unwrap();
                prop_assert!((r - c * base).abs() <= 1e-9 * (1.0 + base.abs() * c));
                let p = level2(&s, &w, qbar, Direction::Below).unwrap();
                let p2 = level2(&scaled, &w, qbar * c, Direction::Below).unwrap();
                prop_assert!((p - p2).abs() < 1e-12);
                let doubled = level3(&s, &w, reserve_shortfall_consequence(2.0 * voll, qbar)).unwrap();
                prop_assert!((doubled - 2.0 * base).abs() <= 1e-9 * (1.0 + base));
                prop_assert_eq!(level3(&s, &w, |_| 0.0).unwrap(), 0.0);
            }
        }
    }
}
