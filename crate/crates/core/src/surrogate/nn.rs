//! Feed-forward regression network trained with Adam and early stopping.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::hal::{hal_loss, hal_subgradient, HalParams};
use crate::error::{Error, Result};

pub const HIDDEN_WIDTHS: [usize; 4] = [50, 30, 20, 10];
pub const LEAKY_SLOPE: f64 = 0.01;
const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Linear => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Dense layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// z-score statistics frozen from the train split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
    pub y_mean: [f64; 4],
    pub y_std: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum LossKind {
    Mae,
    /// One parameter set per output, in QoI order.
    Hal([HalParams; 4]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NnOptions {
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub validation_fraction: f64,
}

impl Default for NnOptions {
    fn default() -> Self {
        NnOptions {
            lr: 1e-3,
            batch: 256,
            max_epochs: 200,
            patience: 20,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    /// Loss over the fitting rows after each epoch.
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralNetwork {
    pub layers: Vec<Layer>,
    pub scaling: Scaling,
    pub loss: LossKind,
    pub history: TrainingHistory,
}

impl NeuralNetwork {
    /// Freshly initialised network (He-uniform weights, zero biases).
    pub fn initialize(n_features: usize, scaling: Scaling, loss: LossKind, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![n_features];
        dims.extend(HIDDEN_WIDTHS);
        dims.push(4);
        let acts = [
            Activation::Relu,
            Activation::LeakyRelu,
            Activation::LeakyRelu,
            Activation::Relu,
            Activation::Linear,
        ];
        let layers = dims
            .windows(2)
            .zip(acts)
            .map(|(w, activation)| {
                let bound = (6.0 / w[0].max(1) as f64).sqrt();
                Layer {
                    inputs: w[0],
                    outputs: w[1],
                    activation,
                    weights: (0..w[0] * w[1]).map(|_| rng.random_range(-bound..bound)).collect(),
                    bias: vec![0.0; w[1]],
                }
            })
            .collect();
        NeuralNetwork {
            layers,
            scaling,
            loss,
            history: TrainingHistory::default(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn n_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flattened parameters: each layer's weights then its biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_parameters());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_parameters(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_parameters() {
            return Err(Error::Dimension {
                what: "network parameters",
                expected: self.n_parameters(),
                found: theta.len(),
            });
        }
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&theta[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&theta[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.layers.first().map_or(0, |l| l.inputs);
        if self.scaling.x_mean.len() != f || self.scaling.x_std.len() != f {
            return Err(Error::Validation("network scaling does not match input width".into()));
        }
        for w in self.layers.windows(2) {
            if w[0].outputs != w[1].inputs {
                return Err(Error::Validation("network layer widths do not chain".into()));
            }
        }
        for l in &self.layers {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::Validation("network layer arrays have wrong sizes".into()));
            }
        }
        if self.layers.last().map(|l| l.outputs) != Some(4) {
            return Err(Error::Validation("network must have 4 outputs".into()));
        }
        Ok(())
    }

    fn scale_input(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            x.iter()
                .zip(&self.scaling.x_mean)
                .zip(&self.scaling.x_std)
                .map(|((v, m), s)| (v - m) / s),
        );
    }

    fn scale_target(&self, y: &[f64; 4]) -> [f64; 4] {
        std::array::from_fn(|k| (y[k] - self.scaling.y_mean[k]) / self.scaling.y_std[k])
    }

    /// Network output in standardized target units.
    fn forward_scaled(&self, input: &[f64]) -> [f64; 4] {
        let mut a = input.to_vec();
        let mut next = Vec::new();
        for l in &self.layers {
            next.clear();
            for o in 0..l.outputs {
                let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                let z = l.bias[o] + row.iter().zip(&a).map(|(w, v)| w * v).sum::<f64>();
                next.push(l.activation.apply(z));
            }
            std::mem::swap(&mut a, &mut next);
        }
        [a[0], a[1], a[2], a[3]]
    }

    /// Prediction in physical units, before any clamping.
    pub fn predict_raw(&self, x: &[f64]) -> [f64; 4] {
        let mut input = Vec::with_capacity(x.len());
        self.scale_input(x, &mut input);
        let out = self.forward_scaled(&input);
        std::array::from_fn(|k| out[k] * self.scaling.y_std[k] + self.scaling.y_mean[k])
    }

    /// Predictions for `out.len()` rows stored row-major in `x`.
    pub fn predict_batch(&self, x: &[f64], out: &mut [[f64; 4]]) {
        let f = self.n_features();
        let widest = self.layers.iter().map(|l| l.outputs).max().unwrap_or(0).max(f);
        let mut a = vec![0.0; widest];
        let mut next = vec![0.0; widest];
        for (row, o) in x.chunks_exact(f).zip(out.iter_mut()) {
            for j in 0..f {
                a[j] = (row[j] - self.scaling.x_mean[j]) / self.scaling.x_std[j];
            }
            for l in &self.layers {
                for (k, w) in l.weights.chunks_exact(l.inputs).enumerate() {
                    let z = l.bias[k] + w.iter().zip(&a[..l.inputs]).map(|(w, v)| w * v).sum::<f64>();
                    next[k] = l.activation.apply(z);
                }
                std::mem::swap(&mut a, &mut next);
            }
            *o = std::array::from_fn(|k| a[k] * self.scaling.y_std[k] + self.scaling.y_mean[k]);
        }
    }

    fn scaled_loss(&self) -> ScaledLoss {
        match self.loss {
            LossKind::Mae => ScaledLoss::Mae,
            LossKind::Hal(params) => ScaledLoss::Hal(std::array::from_fn(|k| {
                params[k].standardized(self.scaling.y_mean[k], self.scaling.y_std[k])
            })),
        }
    }

    /// Mean training objective over the given rows (physical units in,
    /// standardized-space loss out) and its gradient in `parameters()` order.
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], ys: &[[f64; 4]]) -> (f64, Vec<f64>) {
        let loss = self.scaled_loss();
        let mut ws = Workspace::new(self);
        let mut grad = vec![0.0; self.n_parameters()];
        let mut input = Vec::new();
        let mut total = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            self.scale_input(x, &mut input);
            total += self.backprop(&input, &self.scale_target(y), &loss, &mut ws, &mut grad);
        }
        let n = xs.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (total / n, grad)
    }

    /// Mean training objective only.
    pub fn loss_on(&self, xs: &[Vec<f64>], ys: &[[f64; 4]]) -> f64 {
        let loss = self.scaled_loss();
        let mut input = Vec::new();
        let total: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                self.scale_input(x, &mut input);
                loss.value(&self.scale_target(y), &self.forward_scaled(&input))
            })
            .sum();
        total / xs.len().max(1) as f64
    }

    /// Accumulates one sample's gradient into `grad`; returns its loss.
    fn backprop(
        &self,
        input: &[f64],
        target: &[f64; 4],
        loss: &ScaledLoss,
        ws: &mut Workspace,
        grad: &mut [f64],
    ) -> f64 {
        ws.acts[0].clear();
        ws.acts[0].extend_from_slice(input);
        for (i, l) in self.layers.iter().enumerate() {
            let (before, after) = ws.acts.split_at_mut(i + 1);
            let a = &before[i];
            let next = &mut after[0];
            let z = &mut ws.pre[i];
            for o in 0..l.outputs {
                let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                z[o] = l.bias[o] + row.iter().zip(a.iter()).map(|(w, v)| w * v).sum::<f64>();
                next[o] = l.activation.apply(z[o]);
            }
        }
        let out = ws.acts.last().unwrap();
        let pred = [out[0], out[1], out[2], out[3]];
        let value = loss.value(target, &pred);

        let mut delta = loss.gradient(target, &pred).to_vec();
        let mut offset = grad.len();
        for i in (0..self.layers.len()).rev() {
            let l = &self.layers[i];
            for (d, z) in delta.iter_mut().zip(&ws.pre[i]) {
                *d *= l.activation.derivative(*z);
            }
            offset -= l.weights.len() + l.bias.len();
            let (gw, gb) = grad[offset..offset + l.weights.len() + l.bias.len()].split_at_mut(l.weights.len());
            let a = &ws.acts[i];
            for o in 0..l.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                for (g, v) in gw[o * l.inputs..(o + 1) * l.inputs].iter_mut().zip(a) {
                    *g += d * v;
                }
            }
            if i > 0 {
                let mut prev = vec![0.0; l.inputs];
                for o in 0..l.outputs {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    for (p, w) in prev.iter_mut().zip(&l.weights[o * l.inputs..(o + 1) * l.inputs]) {
                        *p += d * w;
                    }
                }
                delta = prev;
            }
        }
        value
    }
}

struct Workspace {
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(net: &NeuralNetwork) -> Self {
        let mut acts = vec![Vec::with_capacity(net.n_features())];
        acts.extend(net.layers.iter().map(|l| vec![0.0; l.outputs]));
        Workspace {
            acts,
            pre: net.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
        }
    }
}

enum ScaledLoss {
    Mae,
    Hal([HalParams; 4]),
}

impl ScaledLoss {
    fn value(&self, y: &[f64; 4], yhat: &[f64; 4]) -> f64 {
        match self {
            ScaledLoss::Mae => (0..4).map(|k| (yhat[k] - y[k]).abs()).sum::<f64>() / 4.0,
            ScaledLoss::Hal(p) => (0..4).map(|k| hal_loss(y[k], yhat[k], &p[k])).sum(),
        }
    }

    fn gradient(&self, y: &[f64; 4], yhat: &[f64; 4]) -> [f64; 4] {
        match self {
            ScaledLoss::Mae => std::array::from_fn(|k| {
                if yhat[k] > y[k] {
                    0.25
                } else if yhat[k] < y[k] {
                    -0.25
                } else {
                    0.0
                }
            }),
            ScaledLoss::Hal(p) => std::array::from_fn(|k| hal_subgradient(y[k], yhat[k], &p[k])),
        }
    }
}

fn scaling_from(ds: &Dataset) -> Scaling {
    let f = ds.n_features();
    let n = ds.train.len() as f64;
    let guard = |s: f64| if s > 1e-12 { s } else { 1.0 };
    let mut x_mean = vec![0.0; f];
    let mut y_mean = [0.0; 4];
    for &i in &ds.train {
        for j in 0..f {
            x_mean[j] += ds.x[i][j];
        }
        for k in 0..4 {
            y_mean[k] += ds.y[i][k];
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= n);
    y_mean = y_mean.map(|m| m / n);
    let mut x_var = vec![0.0; f];
    let mut y_var = [0.0; 4];
    for &i in &ds.train {
        for j in 0..f {
            x_var[j] += (ds.x[i][j] - x_mean[j]).powi(2);
        }
        for k in 0..4 {
            y_var[k] += (ds.y[i][k] - y_mean[k]).powi(2);
        }
    }
    Scaling {
        x_mean,
        x_std: x_var.iter().map(|v| guard((v / n).sqrt())).collect(),
        y_mean,
        y_std: y_var.map(|v| guard((v / n).sqrt())),
    }
}

/// Trains on the train split of `ds`, holding out a seeded slice of it for
/// early stopping and restoring the weights with the best held-out loss.
pub fn train_nn(ds: &Dataset, loss: LossKind, opts: &NnOptions) -> Result<NeuralNetwork> {
    if ds.train.is_empty() {
        return Err(Error::Precondition(format!("hour {}: empty train split", ds.hour)));
    }
    if let LossKind::Hal(params) = &loss {
        params.iter().try_for_each(|p| p.validate())?;
    }
    if opts.batch == 0 || !(opts.lr > 0.0) {
        return Err(Error::Validation("batch must be >= 1 and lr > 0".into()));
    }
    let mut net = NeuralNetwork::initialize(ds.n_features(), scaling_from(ds), loss, opts.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(1);

    let mut rows = ds.train.clone();
    rows.shuffle(&mut rng);
    let n_val = if rows.len() >= 10 {
        ((opts.validation_fraction * rows.len() as f64).round() as usize).min(rows.len() - 1)
    } else {
        0
    };
    let val_rows = rows.split_off(rows.len() - n_val);
    let mut fit_rows = rows;

    let scaled_loss = net.scaled_loss();
    let inputs: Vec<Vec<f64>> = ds
        .x
        .iter()
        .map(|x| {
            let mut v = Vec::new();
            net.scale_input(x, &mut v);
            v
        })
        .collect();
    let targets: Vec<[f64; 4]> = ds.y.iter().map(|y| net.scale_target(y)).collect();
    let mean_loss = |net: &NeuralNetwork, rows: &[usize]| -> f64 {
        rows.iter()
            .map(|&r| scaled_loss.value(&targets[r], &net.forward_scaled(&inputs[r])))
            .sum::<f64>()
            / rows.len().max(1) as f64
    };

    let n_params = net.n_parameters();
    let mut theta = net.parameters();
    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let mut grad = vec![0.0; n_params];
    let mut step = 0i32;
    let mut ws = Workspace::new(&net);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut since_best = 0;

    for epoch in 0..opts.max_epochs {
        fit_rows.shuffle(&mut rng);
        for (batch_idx, batch) in fit_rows.chunks(opts.batch).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &r in batch {
                batch_loss += net.backprop(&inputs[r], &targets[r], &scaled_loss, &mut ws, &mut grad);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: batch_idx,
                });
            }
            step += 1;
            let inv = 1.0 / batch.len() as f64;
            let c1 = 1.0 - BETA1.powi(step);
            let c2 = 1.0 - BETA2.powi(step);
            for i in 0..n_params {
                let g = grad[i] * inv;
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
                theta[i] -= opts.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
            }
            net.set_parameters(&theta)?;
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite {
                epoch,
                batch: fit_rows.len().div_ceil(opts.batch),
            });
        }
        net.history.train_loss.push(mean_loss(&net, &fit_rows));
        if n_val > 0 {
            let val = mean_loss(&net, &val_rows);
            net.history.validation_loss.push(val);
            if best.as_ref().is_none_or(|(b, _)| val < *b) {
                best = Some((val, theta.clone()));
                net.history.best_epoch = Some(epoch);
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= opts.patience {
                    break;
                }
            }
        }
    }
    if let Some((_, params)) = best {
        net.set_parameters(&params)?;
    }
    Ok(net)
}
