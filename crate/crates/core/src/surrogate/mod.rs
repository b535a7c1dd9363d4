//! Per-hour QoI surrogates: hazard-aware loss, random forest and network
//! model families, just-in-time training and validation.

pub mod bank;
pub mod dataset;
pub mod forest;
pub mod hal;
pub mod nn;
pub mod validation;

use serde::{Deserialize, Serialize};

pub use bank::{
    hour_seed, jit_train, train_bank, BankManifest, HourSummary, JitOptions, SurrogateBank,
    SurrogateEvaluator,
};
pub use dataset::{build_datasets, split_scenarios, Dataset, DatasetOptions, SimulationCorpus};
pub use forest::{train_rf, RandomForest, RfParams};
pub use hal::{hal_loss, hal_subgradient, HalParams, HalWeights};
pub use nn::{train_nn, LossKind, NeuralNetwork, NnOptions};
pub use validation::{select_model, validate, validate_pairs, QoiValidation, ValidationReport};

use crate::error::{Error, Result};
use crate::risk::QoiThresholds;
use crate::sced::{QoiKind, QoiSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Rf,
    NnMae,
    NnHal,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Rf, ModelKind::NnMae, ModelKind::NnHal];

    pub fn id(self) -> &'static str {
        match self {
            ModelKind::Rf => "rf",
            ModelKind::NnMae => "nn_mae",
            ModelKind::NnHal => "nn_hal",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.id() == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SurrogateModel {
    Forest(RandomForest),
    Network(NeuralNetwork),
}

impl SurrogateModel {
    pub fn n_features(&self) -> usize {
        match self {
            SurrogateModel::Forest(f) => f.n_features,
            SurrogateModel::Network(n) => n.n_features(),
        }
    }

    pub fn predict_raw(&self, x: &[f64]) -> [f64; 4] {
        match self {
            SurrogateModel::Forest(f) => f.predict_raw(x),
            SurrogateModel::Network(n) => n.predict_raw(x),
        }
    }

    /// Raw predictions for rows stored row-major in `x`.
    pub fn predict_batch(&self, x: &[f64], out: &mut [[f64; 4]]) {
        match self {
            SurrogateModel::Forest(f) => f.predict_batch(x, out),
            SurrogateModel::Network(n) => n.predict_batch(x, out),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SurrogateModel::Forest(f) => f.validate(),
            SurrogateModel::Network(n) => n.validate(),
        }
    }
}

/// Per-QoI loss parameters: cost has no threshold, the others use the
/// system's limits.
pub fn hal_params_for(thresholds: &QoiThresholds, weights: HalWeights) -> [HalParams; 4] {
    QoiKind::ALL.map(|k| HalParams {
        weights,
        threshold: thresholds.get(k),
    })
}

/// Clamps shed and reserves at zero and clips regulating reserve down to
/// operating reserve. The flag reports whether the clip was needed.
pub fn finalize(raw: [f64; 4]) -> (QoiSample, bool) {
    let mut q = QoiSample::from_array(raw);
    q.load_shed = q.load_shed.max(0.0);
    q.op_reserve = q.op_reserve.max(0.0);
    q.reg_reserve = q.reg_reserve.max(0.0);
    let clipped = q.reg_reserve > q.op_reserve;
    if clipped {
        q.reg_reserve = q.op_reserve;
    }
    (q, clipped)
}

pub fn predict(model: &SurrogateModel, features: &[f64]) -> Result<QoiSample> {
    predict_flagged(model, features).map(|(q, _)| q)
}

pub fn predict_flagged(model: &SurrogateModel, features: &[f64]) -> Result<(QoiSample, bool)> {
    if features.len() != model.n_features() {
        return Err(Error::Dimension {
            what: "features",
            expected: model.n_features(),
            found: features.len(),
        });
    }
    Ok(finalize(model.predict_raw(features)))
}
