//! Monte-Carlo scenario generation: day-ahead Dirichlet mixtures of base
//! days, short-term geometric Brownian perturbations, and stressed copies used
//! only to enrich surrogate training data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_model::{Realization, Trajectory, STEPS_PER_HOUR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "DA")]
    DayAhead,
    #[serde(rename = "ST")]
    ShortTerm,
    /// Stressed copies for training only; never used for risk estimation.
    Augmented,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub zones: Vec<String>,
    pub scenarios: Vec<Trajectory>,
    pub weights: Vec<f64>,
    pub provenance: Provenance,
    pub seed: u64,
}

impl ScenarioSet {
    /// Uniformly weighted set.
    pub fn uniform(
        zones: Vec<String>,
        scenarios: Vec<Trajectory>,
        provenance: Provenance,
        seed: u64,
    ) -> Result<Self> {
        let n = scenarios.len();
        let set = ScenarioSet {
            zones,
            weights: vec![1.0 / n.max(1) as f64; n],
            scenarios,
            provenance,
            seed,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.scenarios.first().map_or(0, |s| s.len())
    }

    /// Probability-weighted mean realization at `step`.
    pub fn mean_at(&self, step: usize) -> Realization {
        let nz = self.zones.len();
        let mut mean = Realization::zeros(nz);
        for (s, &w) in self.scenarios.iter().zip(&self.weights) {
            let r = &s[step];
            for z in 0..nz {
                mean.load[z] += w * r.load[z];
                mean.wind[z] += w * r.wind[z];
                mean.solar[z] += w * r.solar[z];
            }
        }
        mean
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.scenarios.len() {
            return Err(Error::Dimension {
                what: "scenario weights",
                expected: self.scenarios.len(),
                found: self.weights.len(),
            });
        }
        let horizon = self.horizon();
        for (i, s) in self.scenarios.iter().enumerate() {
            if s.len() != horizon {
                return Err(Error::Dimension {
                    what: "scenario horizon",
                    expected: horizon,
                    found: s.len(),
                });
            }
            for r in s {
                r.validate(self.zones.len()).map_err(|e| e.in_scenario(i))?;
            }
        }
        if !self.scenarios.is_empty() {
            if self.weights.iter().any(|w| !(*w >= 0.0)) {
                return Err(Error::Validation("negative scenario weight".into()));
            }
            let total: f64 = self.weights.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Validation(format!(
                    "scenario weights sum to {total}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

/// Seeded generator used throughout the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws `n` weight vectors from a symmetric Dirichlet(`alpha`) on `k`
/// components.
///
/// Gamma variates are drawn in log space (`G(a) = G(a+1) * U^(1/a)`) so that
/// concentrations far below one do not underflow to an all-zero draw.
pub fn dirichlet_weights(k: usize, n: usize, alpha: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::Precondition("empty base set".into()));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Precondition(format!("alpha {alpha} must be > 0")));
    }
    let gamma = Gamma::new(alpha + 1.0, 1.0)
        .map_err(|e| Error::Precondition(format!("gamma shape: {e}")))?;
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(n);
    let mut logs = vec![0.0; k];
    for _ in 0..n {
        for l in logs.iter_mut() {
            let g: f64 = gamma.sample(&mut rng);
            // 1 - u lies in (0, 1]
            let u: f64 = 1.0 - rng.random::<f64>();
            *l = g.ln() + u.ln() / alpha;
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        out.push(w);
    }
    Ok(out)
}

fn mix(base: &[Trajectory], w: &[f64]) -> Trajectory {
    let horizon = base[0].len();
    let nz = base[0][0].n_zones();
    (0..horizon)
        .map(|t| {
            let mut r = Realization::zeros(nz);
            for (b, &wk) in base.iter().zip(w) {
                if wk == 0.0 {
                    continue;
                }
                let src = &b[t];
                for z in 0..nz {
                    r.load[z] += wk * src.load[z];
                    r.wind[z] += wk * src.wind[z];
                    r.solar[z] += wk * src.solar[z];
                }
            }
            // Rounding can push a convex combination a hair outside the hull.
            for z in 0..nz {
                clamp_hull(&mut r.load[z], base.iter().map(|b| b[t].load[z]));
                clamp_hull(&mut r.wind[z], base.iter().map(|b| b[t].wind[z]));
                clamp_hull(&mut r.solar[z], base.iter().map(|b| b[t].solar[z]));
            }
            r
        })
        .collect()
}

fn clamp_hull(v: &mut f64, vals: impl Iterator<Item = f64> + Clone) {
    let lo = vals.clone().fold(f64::INFINITY, f64::min);
    let hi = vals.fold(f64::NEG_INFINITY, f64::max);
    *v = v.clamp(lo, hi);
}

/// Day-ahead scenarios as Dirichlet-weighted convex combinations of base days.
pub fn dirichlet_mix(
    zones: &[String],
    base: &[Trajectory],
    n: usize,
    alpha: f64,
    seed: u64,
) -> Result<ScenarioSet> {
    if base.is_empty() {
        return Err(Error::Precondition("empty base set".into()));
    }
    if n == 0 {
        return Err(Error::Precondition("scenario count must be >= 1".into()));
    }
    let horizon = base[0].len();
    if horizon == 0 {
        return Err(Error::Precondition("base trajectories are empty".into()));
    }
    for b in base {
        if b.len() != horizon {
            return Err(Error::Dimension {
                what: "base trajectory horizon",
                expected: horizon,
                found: b.len(),
            });
        }
        for r in b {
            r.validate(zones.len())?;
        }
    }
    let weights = dirichlet_weights(base.len(), n, alpha, seed)?;
    let scenarios = weights.iter().map(|w| mix(base, w)).collect();
    ScenarioSet::uniform(zones.to_vec(), scenarios, Provenance::DayAhead, seed)
}

/// Short-term scenarios: each zonal load, wind and solar channel of the
/// `actual` hour is multiplied by an independent drift-corrected geometric
/// Brownian path `m_t = m_{t-1} exp(s e_t - s^2/2)`, `m_0 = 1`, with per-step
/// volatility `s = rel_sigma_1h / sqrt(12)`.
pub fn gbm_short_term(
    zones: &[String],
    actual: &[Realization],
    n: usize,
    rel_sigma_1h: f64,
    seed: u64,
) -> Result<ScenarioSet> {
    if actual.len() != STEPS_PER_HOUR {
        return Err(Error::Dimension {
            what: "short-term actual trajectory",
            expected: STEPS_PER_HOUR,
            found: actual.len(),
        });
    }
    if !(0.0..0.5).contains(&rel_sigma_1h) {
        return Err(Error::Precondition(format!(
            "rel_sigma_1h {rel_sigma_1h} must lie in [0, 0.5)"
        )));
    }
    if n == 0 {
        return Err(Error::Precondition("scenario count must be >= 1".into()));
    }
    let nz = zones.len();
    for r in actual {
        r.validate(nz)?;
    }
    let sigma = rel_sigma_1h / (STEPS_PER_HOUR as f64).sqrt();
    let drift = -0.5 * sigma * sigma;
    let mut rng = rng_from_seed(seed);
    let mut scenarios = Vec::with_capacity(n);
    let mut m = vec![1.0f64; 3 * nz];
    for _ in 0..n {
        m.iter_mut().for_each(|v| *v = 1.0);
        let mut traj = Vec::with_capacity(STEPS_PER_HOUR);
        for a in actual {
            for v in m.iter_mut() {
                let e: f64 = StandardNormal.sample(&mut rng);
                *v *= (sigma * e + drift).exp();
            }
            let mut r = Realization::zeros(nz);
            for z in 0..nz {
                r.load[z] = (a.load[z] * m[z]).max(0.0);
                r.wind[z] = (a.wind[z] * m[nz + z]).max(0.0);
                r.solar[z] = (a.solar[z] * m[2 * nz + z]).max(0.0);
            }
            traj.push(r);
        }
        scenarios.push(traj);
    }
    ScenarioSet::uniform(zones.to_vec(), scenarios, Provenance::ShortTerm, seed)
}

/// Stressed copies of `base`: for each scenario and factor `f`, zonal load is
/// scaled by `1 + f` and wind and solar by `1 / (1 + f)`.
pub fn augment_unsafe(base: &ScenarioSet, stress_factors: &[f64], seed: u64) -> Result<ScenarioSet> {
    if let Some(f) = stress_factors.iter().find(|f| !(**f >= 0.0)) {
        return Err(Error::Precondition(format!("stress factor {f} must be >= 0")));
    }
    let mut scenarios = Vec::with_capacity(base.len() * stress_factors.len());
    for s in &base.scenarios {
        for &f in stress_factors {
            let up = 1.0 + f;
            scenarios.push(
                s.iter()
                    .map(|r| Realization {
                        load: r.load.iter().map(|v| v * up).collect(),
                        wind: r.wind.iter().map(|v| v / up).collect(),
                        solar: r.solar.iter().map(|v| v / up).collect(),
                    })
                    .collect(),
            );
        }
    }
    let n = scenarios.len();
    let set = ScenarioSet {
        zones: base.zones.clone(),
        weights: vec![1.0 / n.max(1) as f64; n],
        scenarios,
        provenance: Provenance::Augmented,
        seed,
    };
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zones(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("Z{i}")).collect()
    }

    fn flat(len: usize, load: f64, wind: f64, solar: f64) -> Trajectory {
        vec![
            Realization {
                load: vec![load, load / 2.0],
                wind: vec![wind, wind],
                solar: vec![solar, 0.0],
            };
            len
        ]
    }

    fn ramp_day(len: usize, scale: f64) -> Trajectory {
        (0..len)
            .map(|t| Realization {
                load: vec![scale * (100.0 + t as f64), scale * 50.0],
                wind: vec![scale * 3.0, 7.0],
                solar: vec![(t % 5) as f64, scale],
            })
            .collect()
    }

    #[test]
    fn identical_bases_reproduce_the_base() {
        let b = flat(10, 100.0, 10.0, 5.0);
        let set = dirichlet_mix(&zones(2), &[b.clone(), b.clone()], 5, 0.3, 7).unwrap();
        for s in &set.scenarios {
            for (r, e) in s.iter().zip(&b) {
                for z in 0..2 {
                    assert!((r.load[z] - e.load[z]).abs() < 1e-12);
                    assert!((r.wind[z] - e.wind[z]).abs() < 1e-12);
                }
            }
        }
        assert_eq!(set.provenance, Provenance::DayAhead);
    }

    #[test]
    fn mixes_stay_in_the_pointwise_hull() {
        let base: Vec<Trajectory> = (0..4).map(|k| ramp_day(20, 0.8 + 0.1 * k as f64)).collect();
        let set = dirichlet_mix(&zones(2), &base, 50, 0.5, 3).unwrap();
        for s in &set.scenarios {
            for (t, r) in s.iter().enumerate() {
                for z in 0..2 {
                    let vals: Vec<f64> = base.iter().map(|b| b[t].load[z]).collect();
                    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    assert!(r.load[z] >= lo && r.load[z] <= hi);
                }
            }
        }
    }

    #[test]
    fn sparse_dirichlet_weights_are_valid() {
        let w = dirichlet_weights(100, 200, 1e-2, 11).unwrap();
        for v in &w {
            assert!(v.iter().all(|x| x.is_finite() && *x >= 0.0));
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_rejects_bad_inputs() {
        assert!(dirichlet_mix(&zones(2), &[], 1, 0.1, 0).is_err());
        let b = flat(3, 1.0, 1.0, 1.0);
        assert!(dirichlet_mix(&zones(2), &[b.clone(), b.clone()], 1, 0.0, 0).is_err());
        assert!(dirichlet_mix(&zones(2), &[b.clone(), b], 0, 0.1, 0).is_err());
    }

    #[test]
    fn zero_noise_gbm_returns_actual() {
        let actual = flat(12, 100.0, 10.0, 5.0);
        let set = gbm_short_term(&zones(2), &actual, 4, 0.0, 1).unwrap();
        for s in &set.scenarios {
            assert_eq!(s, &actual);
        }
        assert_eq!(set.provenance, Provenance::ShortTerm);
    }

    #[test]
    fn gbm_martingale_and_positivity() {
        let actual = flat(12, 100.0, 10.0, 0.0);
        let set = gbm_short_term(&zones(2), &actual, 10_000, 0.025, 99).unwrap();
        let mean: f64 =
            set.scenarios.iter().map(|s| s[11].load[0] / 100.0).sum::<f64>() / 10_000.0;
        assert!((0.995..=1.005).contains(&mean), "{mean}");
        for s in &set.scenarios {
            for r in s {
                assert!(r.load.iter().all(|v| *v > 0.0));
                // zero actual stays zero
                assert_eq!(r.solar[0], 0.0);
            }
        }
    }

    #[test]
    fn gbm_rejects_wrong_length_and_sigma() {
        let actual = flat(11, 100.0, 10.0, 0.0);
        assert!(gbm_short_term(&zones(2), &actual, 1, 0.02, 0).is_err());
        let actual = flat(12, 100.0, 10.0, 0.0);
        assert!(gbm_short_term(&zones(2), &actual, 1, 0.6, 0).is_err());
    }

    #[test]
    fn augmentation_counts_and_identity_factor() {
        let base = ScenarioSet::uniform(
            zones(2),
            vec![flat(5, 100.0, 10.0, 4.0), flat(5, 80.0, 2.0, 1.0)],
            Provenance::DayAhead,
            0,
        )
        .unwrap();
        let aug = augment_unsafe(&base, &[0.0, 0.08, 0.2], 5).unwrap();
        assert_eq!(aug.len(), 6);
        assert_eq!(aug.provenance, Provenance::Augmented);
        assert_eq!(aug.scenarios[0], base.scenarios[0]);
        let r = &aug.scenarios[1][0];
        assert!((r.load[0] - 108.0).abs() < 1e-9);
        assert!((r.wind[0] - 10.0 / 1.08).abs() < 1e-9);
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let base: Vec<Trajectory> = (0..3).map(|k| ramp_day(12, 1.0 + 0.05 * k as f64)).collect();
        let a = dirichlet_mix(&zones(2), &base, 20, 0.01, 42).unwrap();
        let b = dirichlet_mix(&zones(2), &base, 20, 0.01, 42).unwrap();
        assert_eq!(a, b);
        let g1 = gbm_short_term(&zones(2), &base[0], 20, 0.025, 5).unwrap();
        let g2 = gbm_short_term(&zones(2), &base[0], 20, 0.025, 5).unwrap();
        assert_eq!(g1, g2);
    }
}
