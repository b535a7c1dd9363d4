//! Safe/unsafe-region error metrics and model selection.

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::hal::{hal_loss, HalParams};
use super::SurrogateModel;
use crate::error::{Error, Result};
use crate::sced::QoiKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoiValidation {
    /// Mean absolute error over safe rows divided by `normalizer`.
    pub safe_nmae: Option<f64>,
    /// Same over unsafe rows; absent when no test row is unsafe.
    pub unsafe_nmae: Option<f64>,
    pub n_safe: usize,
    pub n_unsafe: usize,
    pub normalizer: f64,
    /// Mean hazard-aware loss over all rows divided by `normalizer`.
    pub hal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub model_id: String,
    pub n_rows: usize,
    /// Indexed by [`QoiKind::index`].
    pub qoi: [QoiValidation; 4],
    pub hal_aggregate: f64,
}

impl ValidationReport {
    pub fn get(&self, kind: QoiKind) -> &QoiValidation {
        &self.qoi[kind.index()]
    }

    /// Mean unsafe-region NMAE of operating reserve and load shed; infinite
    /// when neither has unsafe rows.
    pub fn selection_score(&self) -> f64 {
        mean_present([QoiKind::OpReserve, QoiKind::LoadShed].map(|k| self.get(k).unsafe_nmae))
    }

    /// Mean safe-region NMAE over the four QoIs; the first tie-breaker.
    pub fn safe_score(&self) -> f64 {
        mean_present(self.qoi.map(|q| q.safe_nmae))
    }
}

fn mean_present<const N: usize>(values: [Option<f64>; N]) -> f64 {
    let present: Vec<f64> = values.into_iter().flatten().collect();
    if present.is_empty() {
        f64::INFINITY
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    }
}

/// Scores `model` on the test split of `ds`, using clamped predictions.
pub fn validate(
    model_id: &str,
    model: &SurrogateModel,
    ds: &Dataset,
    params: &[HalParams; 4],
) -> Result<ValidationReport> {
    if ds.test.is_empty() {
        return Err(Error::Precondition(format!("hour {}: empty test split", ds.hour)));
    }
    let truth: Vec<[f64; 4]> = ds.test.iter().map(|&r| ds.y[r]).collect();
    let pred = ds
        .test
        .iter()
        .map(|&r| super::predict(model, &ds.x[r]).map(|q| q.to_array()))
        .collect::<Result<Vec<_>>>()?;
    validate_pairs(model_id, &truth, &pred, params)
}

/// Region-split errors for paired truth/prediction rows. Regions follow the
/// true value; the normaliser is the overall mean for cost and regulating
/// reserve and the unsafe-region mean for operating reserve and load shed
/// (falling back to the overall mean when that region is empty).
pub fn validate_pairs(
    model_id: &str,
    truth: &[[f64; 4]],
    pred: &[[f64; 4]],
    params: &[HalParams; 4],
) -> Result<ValidationReport> {
    if truth.is_empty() {
        return Err(Error::Precondition("no rows to validate".into()));
    }
    if truth.len() != pred.len() {
        return Err(Error::Dimension {
            what: "predictions",
            expected: truth.len(),
            found: pred.len(),
        });
    }
    let qoi = QoiKind::ALL.map(|kind| {
        let k = kind.index();
        let p = &params[k];
        let (mut safe_err, mut unsafe_err) = (0.0, 0.0);
        let (mut n_safe, mut n_unsafe) = (0usize, 0usize);
        let (mut sum_all, mut sum_unsafe, mut hal) = (0.0, 0.0, 0.0);
        for (y, yhat) in truth.iter().zip(pred) {
            let err = (yhat[k] - y[k]).abs();
            sum_all += y[k];
            hal += hal_loss(y[k], yhat[k], p);
            if p.is_unsafe(y[k]) {
                unsafe_err += err;
                sum_unsafe += y[k];
                n_unsafe += 1;
            } else {
                safe_err += err;
                n_safe += 1;
            }
        }
        let overall = sum_all / truth.len() as f64;
        let raw = match kind {
            QoiKind::Cost | QoiKind::RegReserve => overall,
            QoiKind::OpReserve | QoiKind::LoadShed if n_unsafe > 0 => sum_unsafe / n_unsafe as f64,
            _ => overall,
        };
        let normalizer = if raw.abs() > 1e-12 { raw.abs() } else { 1.0 };
        QoiValidation {
            safe_nmae: (n_safe > 0).then(|| safe_err / n_safe as f64 / normalizer),
            unsafe_nmae: (n_unsafe > 0).then(|| unsafe_err / n_unsafe as f64 / normalizer),
            n_safe,
            n_unsafe,
            normalizer,
            hal: hal / truth.len() as f64 / normalizer,
        }
    });
    let hal_aggregate = qoi.iter().map(|q| q.hal).sum::<f64>() / 4.0;
    Ok(ValidationReport {
        model_id: model_id.to_string(),
        n_rows: truth.len(),
        qoi,
        hal_aggregate,
    })
}

/// Index of the report with the smallest selection score; ties go to the
/// smaller safe score and then to the earlier report.
pub fn select_model(reports: &[ValidationReport]) -> Result<usize> {
    if reports.is_empty() {
        return Err(Error::Precondition("no candidate models".into()));
    }
    let mut best = 0;
    for (i, r) in reports.iter().enumerate().skip(1) {
        let b = &reports[best];
        let (s, bs) = (r.selection_score(), b.selection_score());
        if s < bs || (s == bs && r.safe_score() < b.safe_score()) {
            best = i;
        }
    }
    Ok(best)
}
