//! Just-in-time training of a 24-model bank and its on-disk layout.

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{build_datasets, Dataset, DatasetOptions, SimulationCorpus};
use super::forest::{train_rf, RfParams};
use super::hal::{HalParams, HalWeights};
use super::nn::{train_nn, LossKind, NnOptions};
use super::validation::{validate, validate_pairs, ValidationReport};
use super::{finalize, hal_params_for, ModelKind, SurrogateModel};
use crate::error::{Error, Result};
use crate::grid_model::{
    feature_len, feature_names, Realization, Trajectory, HOURS_PER_DAY, STEPS_PER_DAY, STEPS_PER_HOUR,
};
use crate::risk::{Evaluator, QoiThresholds};
use crate::sced::{DispatchState, QoiSample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitOptions {
    pub seed: u64,
    pub rf: RfParams,
    pub nn: NnOptions,
    pub hal_weights: HalWeights,
    pub thresholds: QoiThresholds,
}

impl JitOptions {
    pub fn new(thresholds: QoiThresholds, seed: u64) -> Self {
        JitOptions {
            seed,
            rf: RfParams::default(),
            nn: NnOptions::default(),
            hal_weights: HalWeights::default(),
            thresholds,
        }
    }

    pub fn hal_params(&self) -> [HalParams; 4] {
        hal_params_for(&self.thresholds, self.hal_weights)
    }
}

/// Seed of one hour's training, derived from the master seed.
pub fn hour_seed(master: u64, hour: usize) -> u64 {
    master
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(hour as u64 + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourSummary {
    pub hour: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub report: Option<ValidationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankManifest {
    pub model_kind: ModelKind,
    pub zones: Vec<String>,
    pub feature_order: Vec<String>,
    pub options: JitOptions,
    pub hours: Vec<HourSummary>,
    /// Test rows of all hours pooled.
    pub report: Option<ValidationReport>,
}

/// One trained model per hour of the day, sharing a feature order.
#[derive(Debug)]
pub struct SurrogateBank {
    pub manifest: BankManifest,
    models: Vec<SurrogateModel>,
    clipped: AtomicU64,
}

impl SurrogateBank {
    pub fn new(manifest: BankManifest, models: Vec<SurrogateModel>) -> Result<Self> {
        if models.len() != HOURS_PER_DAY {
            return Err(Error::Dimension {
                what: "bank models",
                expected: HOURS_PER_DAY,
                found: models.len(),
            });
        }
        let f = manifest.feature_order.len();
        if f != feature_len(manifest.zones.len()) {
            return Err(Error::Validation("feature order does not match zone count".into()));
        }
        for (h, m) in models.iter().enumerate() {
            m.validate().map_err(|e| e.in_hour(h))?;
            if m.n_features() != f {
                return Err(Error::Dimension {
                    what: "model features",
                    expected: f,
                    found: m.n_features(),
                }
                .in_hour(h));
            }
        }
        Ok(SurrogateBank {
            manifest,
            models,
            clipped: AtomicU64::new(0),
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.manifest.model_kind
    }

    pub fn model(&self, hour: usize) -> &SurrogateModel {
        &self.models[hour]
    }

    pub fn n_features(&self) -> usize {
        self.manifest.feature_order.len()
    }

    /// How many predictions needed regulating reserve clipped to operating
    /// reserve since the bank was built or loaded.
    pub fn clip_count(&self) -> u64 {
        self.clipped.load(Ordering::Relaxed)
    }

    pub fn predict(&self, hour: usize, features: &[f64]) -> Result<QoiSample> {
        if hour >= HOURS_PER_DAY {
            return Err(Error::Validation(format!("hour {hour} out of range")));
        }
        if features.len() != self.n_features() {
            return Err(Error::Dimension {
                what: "features",
                expected: self.n_features(),
                found: features.len(),
            });
        }
        let (q, clipped) = finalize(self.models[hour].predict_raw(features));
        if clipped {
            self.clipped.fetch_add(1, Ordering::Relaxed);
        }
        Ok(q)
    }

    /// Clamped predictions for rows stored row-major in `x`.
    pub fn predict_batch(&self, hour: usize, x: &[f64]) -> Result<Vec<QoiSample>> {
        if hour >= HOURS_PER_DAY {
            return Err(Error::Validation(format!("hour {hour} out of range")));
        }
        let f = self.n_features();
        if x.len() % f != 0 {
            return Err(Error::Dimension {
                what: "feature matrix",
                expected: f,
                found: x.len() % f,
            });
        }
        let mut raw = vec![[0.0; 4]; x.len() / f];
        self.models[hour].predict_batch(x, &mut raw);
        let mut clipped = 0;
        let out = raw
            .into_iter()
            .map(|r| {
                let (q, c) = finalize(r);
                clipped += c as u64;
                q
            })
            .collect();
        if clipped > 0 {
            self.clipped.fetch_add(clipped, Ordering::Relaxed);
        }
        Ok(out)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join("manifest.json"), &self.manifest)?;
        for (h, m) in self.models.iter().enumerate() {
            write_json(&dir.join(model_file(h)), m)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: BankManifest = read_json(&dir.join("manifest.json"))?;
        let models = (0..HOURS_PER_DAY)
            .map(|h| read_json(&dir.join(model_file(h))))
            .collect::<Result<Vec<SurrogateModel>>>()?;
        SurrogateBank::new(manifest, models)
    }
}

fn model_file(hour: usize) -> String {
    format!("hour_{hour:02}.json")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn train_one(ds: &Dataset, kind: ModelKind, options: &JitOptions, seed: u64) -> Result<SurrogateModel> {
    Ok(match kind {
        ModelKind::Rf => SurrogateModel::Forest(train_rf(ds, &RfParams { seed, ..options.rf })?),
        ModelKind::NnMae => {
            SurrogateModel::Network(train_nn(ds, LossKind::Mae, &NnOptions { seed, ..options.nn })?)
        }
        ModelKind::NnHal => SurrogateModel::Network(train_nn(
            ds,
            LossKind::Hal(options.hal_params()),
            &NnOptions { seed, ..options.nn },
        )?),
    })
}

/// Trains one model per hour from prepared datasets, validating each on its
/// test split and on the pooled test rows.
pub fn train_bank(
    datasets: &[Dataset],
    zones: &[String],
    kind: ModelKind,
    options: &JitOptions,
) -> Result<SurrogateBank> {
    if datasets.len() != HOURS_PER_DAY {
        return Err(Error::Dimension {
            what: "hourly datasets",
            expected: HOURS_PER_DAY,
            found: datasets.len(),
        });
    }
    let params = options.hal_params();
    let trained = datasets
        .par_iter()
        .enumerate()
        .map(|(h, ds)| {
            let seed = hour_seed(options.seed, h);
            let model = train_one(ds, kind, options, seed).map_err(|e| e.in_hour(h))?;
            let report = if ds.test.is_empty() {
                None
            } else {
                Some(validate(kind.id(), &model, ds, &params).map_err(|e| e.in_hour(h))?)
            };
            let summary = HourSummary {
                hour: h,
                seed,
                n_train: ds.train.len(),
                n_test: ds.test.len(),
                report,
            };
            Ok((model, summary))
        })
        .collect::<Result<Vec<_>>>()?;
    let (models, hours): (Vec<_>, Vec<_>) = trained.into_iter().unzip();

    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for (ds, model) in datasets.iter().zip(&models) {
        for &r in &ds.test {
            truth.push(ds.y[r]);
            pred.push(finalize(model.predict_raw(&ds.x[r])).0.to_array());
        }
    }
    let report = if truth.is_empty() {
        None
    } else {
        Some(validate_pairs(kind.id(), &truth, &pred, &params)?)
    };
    let manifest = BankManifest {
        model_kind: kind,
        zones: zones.to_vec(),
        feature_order: feature_names(zones),
        options: *options,
        hours,
        report,
    };
    SurrogateBank::new(manifest, models)
}

/// Builds the hourly datasets from a simulation corpus and trains a bank.
pub fn jit_train(
    corpus: &SimulationCorpus,
    augmented: Option<&SimulationCorpus>,
    kind: ModelKind,
    dataset_options: &DatasetOptions,
    options: &JitOptions,
) -> Result<SurrogateBank> {
    let datasets = build_datasets(corpus, augmented, dataset_options)?;
    train_bank(&datasets, &corpus.scenarios.zones, kind, options)
}

/// Evaluates trajectories with the bank model of each step's hour. The
/// starting dispatch is not needed: commitment effects live in the per-hour
/// models.
pub struct SurrogateEvaluator<'a> {
    pub bank: &'a SurrogateBank,
}

impl Evaluator for SurrogateEvaluator<'_> {
    fn kind(&self) -> &'static str {
        self.bank.kind().id()
    }

    fn evaluate(
        &self,
        trajectory: &[Realization],
        start_step: usize,
        _initial: &DispatchState,
    ) -> Result<Vec<QoiSample>> {
        let mut features = Vec::with_capacity(self.bank.n_features());
        trajectory
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let step = (start_step + k) % STEPS_PER_DAY;
                crate::grid_model::features_into(r, &mut features);
                self.bank
                    .predict(step / STEPS_PER_HOUR, &features)
                    .map_err(|e| e.at_step(start_step + k))
            })
            .collect()
    }

    /// Step by step, predicts every scenario of the block in one batch.
    fn evaluate_block(
        &self,
        trajectories: &[Trajectory],
        first: usize,
        start_step: usize,
        _initial: &DispatchState,
    ) -> Result<Vec<Vec<QoiSample>>> {
        let horizon = trajectories.first().map_or(0, |t| t.len());
        if let Some(i) = trajectories.iter().position(|t| t.len() != horizon) {
            return Err(Error::Dimension {
                what: "trajectory steps",
                expected: horizon,
                found: trajectories[i].len(),
            }
            .in_scenario(first + i));
        }
        let f = self.bank.n_features();
        let mut out: Vec<Vec<QoiSample>> = trajectories.iter().map(|_| Vec::with_capacity(horizon)).collect();
        let mut x = Vec::with_capacity(trajectories.len() * f);
        let mut row = Vec::with_capacity(f);
        for k in 0..horizon {
            let step = (start_step + k) % STEPS_PER_DAY;
            x.clear();
            for t in trajectories {
                crate::grid_model::features_into(&t[k], &mut row);
                if row.len() != f {
                    return Err(Error::Dimension {
                        what: "features",
                        expected: f,
                        found: row.len(),
                    }
                    .at_step(start_step + k));
                }
                x.extend_from_slice(&row);
            }
            let preds = self
                .bank
                .predict_batch(step / STEPS_PER_HOUR, &x)
                .map_err(|e| e.at_step(start_step + k))?;
            for (o, q) in out.iter_mut().zip(preds) {
                o.push(q);
            }
        }
        Ok(out)
    }
}
