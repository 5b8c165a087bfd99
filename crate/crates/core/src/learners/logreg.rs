//! Multinomial logistic regression trained by full-batch gradient descent on
//! standardized features.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::early_stop::{EarlyStopping, Observation};
use super::gbdt::argmax;
use super::Probabilities;
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::seeded_rng;

const STREAM_INIT: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegParams {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub l2: f64,
    pub patience: usize,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            learning_rate: 0.1,
            max_epochs: 500,
            l2: 1e-3,
            patience: 50,
        }
    }
}

impl LogRegParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.max_epochs < 1 {
            return Err(Error::Config("max_epochs must be >= 1".into()));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::Config("l2 must be >= 0".into()));
        }
        if self.patience < 1 {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        Ok(())
    }
}

/// Weights are stored class-major: `weights[k * (m + 1) + j]`, with the bias
/// at `j = m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub n_features: usize,
    pub n_classes: usize,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LogRegModel {
    /// All-zero weights and identity scaling: predicts the uniform distribution.
    pub fn zeros(n_features: usize, n_classes: usize) -> Self {
        LogRegModel {
            n_features,
            n_classes,
            mean: vec![0.0; n_features],
            scale: vec![1.0; n_features],
            weights: vec![0.0; n_classes * (n_features + 1)],
        }
    }

    fn standardize(&self, x: &[f64], out: &mut [f64]) {
        for j in 0..self.n_features {
            out[j] = (x[j] - self.mean[j]) / self.scale[j];
        }
    }

    pub fn predict_proba(&self, values: &[f64], n_rows: usize) -> Probabilities {
        let m = self.n_features;
        let k = self.n_classes;
        let mut z = vec![0.0; m];
        let mut out = Vec::with_capacity(n_rows * k);
        for x in values.chunks_exact(m).take(n_rows) {
            self.standardize(x, &mut z);
            let start = out.len();
            out.resize(start + k, 0.0);
            softmax_row(&self.weights, &z, k, &mut out[start..]);
        }
        Probabilities::new(k, out)
    }

    /// Mean absolute coefficient per (standardized) feature across classes.
    pub fn feature_importances(&self) -> Vec<f64> {
        let m = self.n_features;
        (0..m)
            .map(|j| {
                (0..self.n_classes)
                    .map(|k| self.weights[k * (m + 1) + j].abs())
                    .sum::<f64>()
                    / self.n_classes as f64
            })
            .collect()
    }
}

fn softmax_row(weights: &[f64], x: &[f64], k: usize, out: &mut [f64]) {
    let m = x.len();
    for c in 0..k {
        let w = &weights[c * (m + 1)..(c + 1) * (m + 1)];
        out[c] = w[m] + w[..m].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
    let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in out.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    out.iter_mut().for_each(|v| *v /= total);
}

/// Weighted mean cross-entropy plus `l2 / 2 * ||W||^2` (biases unpenalized),
/// and its gradient with respect to `weights`.
///
/// `x` is row-major `n x m`; `weights` has the layout of [`LogRegModel`].
pub fn loss_and_gradient(
    weights: &[f64],
    x: &[f64],
    y: &[usize],
    sample_weights: &[f64],
    n_classes: usize,
    l2: f64,
) -> (f64, Vec<f64>) {
    let n = y.len();
    let m = if n == 0 { 0 } else { x.len() / n };
    let stride = m + 1;
    let total_w: f64 = sample_weights.iter().sum();
    let mut grad = vec![0.0; weights.len()];
    let mut loss = 0.0;
    let mut p = vec![0.0; n_classes];
    for i in 0..n {
        let xi = &x[i * m..(i + 1) * m];
        softmax_row(weights, xi, n_classes, &mut p);
        let wi = sample_weights[i] / total_w;
        loss -= wi * p[y[i]].max(1e-300).ln();
        for c in 0..n_classes {
            let d = wi * (p[c] - if c == y[i] { 1.0 } else { 0.0 });
            let gc = &mut grad[c * stride..(c + 1) * stride];
            for j in 0..m {
                gc[j] += d * xi[j];
            }
            gc[m] += d;
        }
    }
    for c in 0..n_classes {
        for j in 0..m {
            let w = weights[c * stride + j];
            loss += 0.5 * l2 * w * w;
            grad[c * stride + j] += l2 * w;
        }
    }
    (loss, grad)
}

pub(crate) struct FitOutput {
    pub model: LogRegModel,
    pub trace: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn fit(
    params: &LogRegParams,
    seed: u64,
    n_classes: usize,
    m: usize,
    train: &[f64],
    y: &[usize],
    sample_weights: &[f64],
    valid: &[f64],
    valid_y: &[usize],
    metric: Metric,
) -> Result<FitOutput> {
    params.validate()?;
    let n = y.len();
    let mut model = LogRegModel::zeros(m, n_classes);
    for j in 0..m {
        let col = (0..n).map(|i| train[i * m + j]);
        let mean = col.clone().sum::<f64>() / n as f64;
        let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        model.mean[j] = mean;
        model.scale[j] = if var > 1e-24 { var.sqrt() } else { 1.0 };
    }
    let standardize = |raw: &[f64], rows: usize| {
        let mut out = vec![0.0; rows * m];
        for i in 0..rows {
            model.standardize(&raw[i * m..(i + 1) * m], &mut out[i * m..(i + 1) * m]);
        }
        out
    };
    let xt = standardize(train, n);
    let xv = standardize(valid, valid_y.len());

    let mut rng = seeded_rng(seed, STREAM_INIT);
    let init = Normal::new(0.0, 0.01).expect("valid normal");
    let mut weights: Vec<f64> = (0..model.weights.len()).map(|_| init.sample(&mut rng)).collect();
    let mut best = weights.clone();
    let mut stopper = EarlyStopping::new(params.patience);
    let mut trace = Vec::new();
    let mut p = vec![0.0; n_classes];
    for _ in 0..params.max_epochs {
        let (_, grad) = loss_and_gradient(&weights, &xt, y, sample_weights, n_classes, params.l2);
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= params.learning_rate * g;
        }
        let pred: Vec<usize> = (0..valid_y.len())
            .map(|i| {
                softmax_row(&weights, &xv[i * m..(i + 1) * m], n_classes, &mut p);
                argmax(p.iter().copied())
            })
            .collect();
        let score = metric.from_labels(valid_y, &pred, n_classes)?;
        trace.push(score);
        let obs = stopper.observe(score);
        if stopper.best_round() == Some(trace.len() - 1) {
            best.clone_from(&weights);
        }
        if obs == Observation::Stop {
            break;
        }
    }
    model.weights = best;
    Ok(FitOutput { model, trace })
}
