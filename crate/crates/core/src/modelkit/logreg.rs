use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::base::SparseVector;
use crate::error::{Error, Result};

/// Mini-batch SGD hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Per-example step size; step `t` (1-based) uses `learning_rate / sqrt(t)`.
    /// Each mini-batch update sums the per-example gradients.
    pub learning_rate: f64,
    pub l2: f64,
    /// Standard deviation of the Gaussian weight initialization.
    pub init_scale: f64,
    /// Evenly spaced parameter snapshots kept for TracIn-style scoring.
    pub checkpoints: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5,
            batch_size: 32,
            learning_rate: 0.1,
            l2: 1e-4,
            init_scale: 0.01,
            checkpoints: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.l2 >= 0.0) || !(self.init_scale >= 0.0) {
            return Err(Error::Config("learning_rate must be > 0, l2 and init_scale >= 0".into()));
        }
        Ok(())
    }
}

/// Weights (`classes x features`, row-major) and per-class bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub n_classes: usize,
    pub n_features: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearParams {
    pub fn zeros(n_classes: usize, n_features: usize) -> Self {
        LinearParams {
            n_classes,
            n_features,
            weights: vec![0.0; n_classes * n_features],
            bias: vec![0.0; n_classes],
        }
    }

    pub fn weight(&self, class: usize, feature: usize) -> f64 {
        self.weights[class * self.n_features + feature]
    }

    pub fn logits(&self, x: &SparseVector) -> Vec<f64> {
        (0..self.n_classes)
            .map(|c| {
                let row = &self.weights[c * self.n_features..(c + 1) * self.n_features];
                self.bias[c] + x.iter().map(|(f, v)| row[f] * v).sum::<f64>()
            })
            .collect()
    }

    pub fn proba(&self, x: &SparseVector) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    pub fn cross_entropy(&self, x: &SparseVector, y: usize) -> f64 {
        let z = self.logits(x);
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        lse - z[y]
    }

    /// Gradient of the cross-entropy w.r.t. the logits: `p - onehot(y)`.
    /// The weight gradient is its outer product with `x`, the bias gradient
    /// is the vector itself.
    pub fn logit_gradient(&self, x: &SparseVector, y: usize) -> Vec<f64> {
        let mut g = self.proba(x);
        g[y] -= 1.0;
        g
    }

    /// Dense `(weight, bias)` gradient of the cross-entropy.
    pub fn gradient(&self, x: &SparseVector, y: usize) -> (Vec<f64>, Vec<f64>) {
        let g = self.logit_gradient(x, y);
        let mut dw = vec![0.0; self.weights.len()];
        for (c, gc) in g.iter().enumerate() {
            for (f, v) in x.iter() {
                dw[c * self.n_features + f] = gc * v;
            }
        }
        (dw, g)
    }
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|v| v / sum).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    /// Step size in effect at `step`.
    pub learning_rate: f64,
    pub params: LinearParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub params: LinearParams,
    /// Snapshots ordered by step.
    pub trace: Vec<Checkpoint>,
}

impl LinearModel {
    pub fn n_classes(&self) -> usize {
        self.params.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.params.n_features
    }
}

fn check_dims(vectors: &[SparseVector], n_features: usize) -> Result<()> {
    match vectors.iter().position(|v| v.dim() != n_features) {
        Some(i) => Err(Error::invalid(format!(
            "vector {i} has dimension {}, model expects {n_features}",
            vectors[i].dim()
        ))),
        None => Ok(()),
    }
}

/// Multinomial logistic regression by mini-batch SGD.
///
/// The seed drives both the Gaussian initialization and the per-epoch
/// shuffle, so two calls with the same seed give bit-identical weights.
pub fn train_logreg(
    vectors: &[SparseVector],
    labels: &[u32],
    n_classes: usize,
    seed: u64,
    cfg: &TrainConfig,
) -> Result<LinearModel> {
    fit(vectors, labels, n_classes, seed, cfg, None)
}

/// Retrains with example `removed` left out while every other example keeps
/// the initialization, shuffle and batch it gets from [`train_logreg`] with
/// the same seed; only the removed example's gradient is missing.
pub fn train_logreg_without(
    vectors: &[SparseVector],
    labels: &[u32],
    n_classes: usize,
    seed: u64,
    cfg: &TrainConfig,
    removed: usize,
) -> Result<LinearModel> {
    if removed >= vectors.len() {
        return Err(Error::invalid(format!(
            "cannot remove example {removed} of {}",
            vectors.len()
        )));
    }
    fit(vectors, labels, n_classes, seed, cfg, Some(removed))
}

fn fit(
    vectors: &[SparseVector],
    labels: &[u32],
    n_classes: usize,
    seed: u64,
    cfg: &TrainConfig,
    removed: Option<usize>,
) -> Result<LinearModel> {
    cfg.validate()?;
    if vectors.is_empty() || vectors.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} vectors and {} labels",
            vectors.len(),
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&y| y as usize >= n_classes) {
        return Err(Error::invalid(format!("label {bad} outside 0..{n_classes}")));
    }
    let mut present = vec![false; n_classes];
    labels
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != removed)
        .for_each(|(_, &y)| present[y as usize] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::invalid("training labels must contain at least 2 classes"));
    }
    let n_features = vectors[0].dim();
    check_dims(vectors, n_features)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = LinearParams::zeros(n_classes, n_features);
    if cfg.init_scale > 0.0 {
        let init = Normal::new(0.0, cfg.init_scale).expect("valid normal");
        params.weights.iter_mut().for_each(|w| *w = init.sample(&mut rng));
    }

    let steps_per_epoch = vectors.len().div_ceil(cfg.batch_size);
    let total = steps_per_epoch * cfg.epochs;
    let marks: Vec<usize> = (1..=cfg.checkpoints)
        .map(|k| ((k * total) as f64 / cfg.checkpoints as f64).round() as usize)
        .map(|s| s.clamp(1, total))
        .collect();
    let mut trace = Vec::with_capacity(cfg.checkpoints);

    let mut order: Vec<usize> = (0..vectors.len()).collect();
    let mut step = 0;
    let mut grad_bias = vec![0.0; n_classes];
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            step += 1;
            let lr = cfg.learning_rate / (step as f64).sqrt();
            // logit gradients at the pre-update parameters
            let mut loss = 0.0;
            let batch: Vec<usize> = batch.iter().copied().filter(|&i| Some(i) != removed).collect();
            let grads: Vec<Vec<f64>> = batch
                .iter()
                .map(|&i| {
                    let y = labels[i] as usize;
                    loss += params.cross_entropy(&vectors[i], y);
                    params.logit_gradient(&vectors[i], y)
                })
                .collect();
            if !loss.is_finite() {
                return Err(Error::Diverged { step, loss });
            }
            let decay = 1.0 - lr * cfg.l2;
            params.weights.iter_mut().for_each(|w| *w *= decay);
            grad_bias.iter_mut().for_each(|g| *g = 0.0);
            for (&i, g) in batch.iter().zip(&grads) {
                for (c, gc) in g.iter().enumerate() {
                    grad_bias[c] += gc;
                    let row = c * n_features;
                    for (f, v) in vectors[i].iter() {
                        params.weights[row + f] -= lr * gc * v;
                    }
                }
            }
            for (b, g) in params.bias.iter_mut().zip(&grad_bias) {
                *b -= lr * g;
            }
            if params.weights.iter().chain(&params.bias).any(|w| !w.is_finite()) {
                return Err(Error::Diverged { step, loss: f64::NAN });
            }
            while trace.len() < marks.len() && marks[trace.len()] == step {
                trace.push(Checkpoint {
                    step,
                    learning_rate: lr,
                    params: params.clone(),
                });
            }
        }
    }
    Ok(LinearModel { params, trace })
}

/// Softmax class probabilities, one row per input vector.
pub fn predict_proba(model: &LinearModel, vectors: &[SparseVector]) -> Result<Vec<Vec<f64>>> {
    check_dims(vectors, model.n_features())?;
    Ok(vectors.iter().map(|v| model.params.proba(v)).collect())
}

/// Fraction of `vectors` whose argmax class equals the label.
pub fn accuracy(model: &LinearModel, vectors: &[SparseVector], labels: &[u32]) -> Result<f64> {
    if vectors.is_empty() {
        return Err(Error::invalid("accuracy over an empty set"));
    }
    let probs = predict_proba(model, vectors)?;
    let hits = probs
        .iter()
        .zip(labels)
        .filter(|(p, &y)| argmax(p) == y as usize)
        .count();
    Ok(hits as f64 / vectors.len() as f64)
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
