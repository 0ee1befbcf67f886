//! Per-example proxy scores from trained linear models, the seeded score
//! matrix builder, and a leave-one-out diagnostic.
//!
//! Every proxy is oriented so that a higher score means a better or more
//! helpful example.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::{ExampleId, ScoreMatrix, SparseVector};
use crate::error::{Error, Result};
use crate::modelkit::{accuracy, train_logreg, train_logreg_without, LinearModel, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProxyKind {
    /// Negated per-example cross-entropy.
    Loss,
    /// Gold-class probability minus the strongest competing class.
    Margin,
    /// Gold-class probability.
    Confidence,
    /// Step-size-weighted checkpoint sum of gradient inner products with the
    /// mean validation gradient.
    Tracin,
}

impl ProxyKind {
    pub const ALL: [ProxyKind; 4] = [
        ProxyKind::Loss,
        ProxyKind::Margin,
        ProxyKind::Confidence,
        ProxyKind::Tracin,
    ];

    pub fn needs_validation(self) -> bool {
        self == ProxyKind::Tracin
    }
}

impl fmt::Display for ProxyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProxyKind::Loss => "loss",
            ProxyKind::Margin => "margin",
            ProxyKind::Confidence => "confidence",
            ProxyKind::Tracin => "tracin",
        })
    }
}

impl FromStr for ProxyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProxyKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown proxy `{s}`")))
    }
}

/// Feature vectors with labels.
#[derive(Debug, Clone, Copy)]
pub struct Labeled<'a> {
    pub vectors: &'a [SparseVector],
    pub labels: &'a [u32],
}

impl<'a> Labeled<'a> {
    pub fn new(vectors: &'a [SparseVector], labels: &'a [u32]) -> Result<Self> {
        if vectors.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} vectors but {} labels",
                vectors.len(),
                labels.len()
            )));
        }
        Ok(Labeled { vectors, labels })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

pub fn score_proxy(
    kind: ProxyKind,
    model: &LinearModel,
    data: Labeled<'_>,
    val: Option<Labeled<'_>>,
) -> Result<Vec<f64>> {
    let c = model.n_classes();
    if let Some(bad) = data.labels.iter().find(|&&y| y as usize >= c) {
        return Err(Error::invalid(format!("label {bad} outside 0..{c}")));
    }
    if let Some(i) = data.vectors.iter().position(|v| v.dim() != model.n_features()) {
        return Err(Error::invalid(format!("vector {i} has the wrong dimension")));
    }
    let pointwise = |f: &dyn Fn(&[f64], usize) -> f64| {
        data.vectors
            .iter()
            .zip(data.labels)
            .map(|(x, &y)| f(&model.params.proba(x), y as usize))
            .collect::<Vec<f64>>()
    };
    Ok(match kind {
        ProxyKind::Loss => data
            .vectors
            .iter()
            .zip(data.labels)
            .map(|(x, &y)| -model.params.cross_entropy(x, y as usize))
            .collect(),
        ProxyKind::Confidence => pointwise(&|p, y| p[y]),
        ProxyKind::Margin => pointwise(&|p, y| {
            let rival = p
                .iter()
                .enumerate()
                .filter(|&(c, _)| c != y)
                .map(|(_, &q)| q)
                .fold(f64::NEG_INFINITY, f64::max);
            p[y] - rival
        }),
        ProxyKind::Tracin => {
            let val = val.ok_or_else(|| Error::invalid("tracin needs a validation batch"))?;
            tracin_scores(model, data, val)?
        }
    })
}

fn tracin_scores(model: &LinearModel, data: Labeled<'_>, val: Labeled<'_>) -> Result<Vec<f64>> {
    if model.trace.is_empty() {
        return Err(Error::invalid("tracin needs a model with a training trace"));
    }
    if val.is_empty() {
        return Err(Error::invalid("tracin needs a non-empty validation batch"));
    }
    let f = model.n_features();
    let c = model.n_classes();
    let mut scores = vec![0.0; data.len()];
    for ck in &model.trace {
        // mean validation gradient at this checkpoint
        let mut gw = vec![0.0; c * f];
        let mut gb = vec![0.0; c];
        for (x, &y) in val.vectors.iter().zip(val.labels) {
            let g = ck.params.logit_gradient(x, y as usize);
            for (k, gk) in g.iter().enumerate() {
                gb[k] += gk;
                for (j, v) in x.iter() {
                    gw[k * f + j] += gk * v;
                }
            }
        }
        let m = val.len() as f64;
        gw.iter_mut().chain(gb.iter_mut()).for_each(|v| *v /= m);
        for (s, (x, &y)) in scores.iter_mut().zip(data.vectors.iter().zip(data.labels)) {
            let g = ck.params.logit_gradient(x, y as usize);
            let dot: f64 = g
                .iter()
                .enumerate()
                .map(|(k, gk)| gk * (gb[k] + x.iter().map(|(j, v)| v * gw[k * f + j]).sum::<f64>()))
                .sum();
            *s += ck.learning_rate * dot;
        }
    }
    Ok(scores)
}

/// Everything needed to train and score one seed column.
#[derive(Debug, Clone)]
pub struct ScoringInput {
    pub ids: Vec<ExampleId>,
    pub vectors: Vec<SparseVector>,
    pub labels: Vec<u32>,
    pub n_classes: usize,
    /// Validation batch for TracIn-style scoring.
    pub val: Option<(Vec<SparseVector>, Vec<u32>)>,
}

impl ScoringInput {
    pub fn train(&self) -> Labeled<'_> {
        Labeled {
            vectors: &self.vectors,
            labels: &self.labels,
        }
    }

    pub fn val(&self) -> Option<Labeled<'_>> {
        self.val.as_ref().map(|(v, l)| Labeled {
            vectors: v,
            labels: l,
        })
    }
}

/// Trains one model per seed and scores every example with `kind`.
/// Column `r` comes from the model trained with `seeds[r]`.
pub fn score_matrix(
    input: &ScoringInput,
    kind: ProxyKind,
    seeds: &[u64],
    cfg: &TrainConfig,
) -> Result<ScoreMatrix<f64>> {
    if seeds.is_empty() {
        return Err(Error::Config("need at least one seed".into()));
    }
    if input.ids.len() != input.vectors.len() || input.ids.len() != input.labels.len() {
        return Err(Error::invalid("ids, vectors and labels differ in length"));
    }
    if kind.needs_validation() && input.val.as_ref().is_none_or(|v| v.0.is_empty()) {
        return Err(Error::Config("tracin proxy needs a validation batch".into()));
    }
    let columns = seeds
        .par_iter()
        .map(|&seed| {
            let model = train_logreg(&input.vectors, &input.labels, input.n_classes, seed, cfg)?;
            score_proxy(kind, &model, input.train(), input.val())
        })
        .collect::<Result<Vec<_>>>()?;
    ScoreMatrix::from_columns(input.ids.clone(), seeds.to_vec(), columns)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooConfig {
    pub train: TrainConfig,
    /// Every retraining uses this seed.
    pub seed: u64,
    /// Refuse datasets larger than this unless raised explicitly.
    pub max_examples: usize,
}

impl Default for LooConfig {
    fn default() -> Self {
        LooConfig {
            train: TrainConfig::default(),
            seed: 0,
            max_examples: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooResult {
    /// `U(D) - U(D \ {i})` per training example.
    pub values: Vec<f64>,
    pub utility_full: f64,
}

/// Leave-one-out values with validation accuracy as the utility.
///
/// Each retraining uses `cfg.seed` through [`train_logreg_without`], so the
/// only difference from the full run is the missing example.
pub fn loo_values(
    train: Labeled<'_>,
    val: Labeled<'_>,
    n_classes: usize,
    cfg: &LooConfig,
) -> Result<LooResult> {
    if val.is_empty() {
        return Err(Error::invalid("LOO needs a non-empty validation set"));
    }
    let n = train.len();
    if n > cfg.max_examples {
        return Err(Error::Config(format!(
            "LOO over {n} examples exceeds the guard of {}",
            cfg.max_examples
        )));
    }
    let full = train_logreg(train.vectors, train.labels, n_classes, cfg.seed, &cfg.train)?;
    let utility_full = accuracy(&full, val.vectors, val.labels)?;
    let values = (0..n)
        .into_par_iter()
        .map(|i| {
            let model =
                train_logreg_without(train.vectors, train.labels, n_classes, cfg.seed, &cfg.train, i)?;
            Ok(utility_full - accuracy(&model, val.vectors, val.labels)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LooResult {
        values,
        utility_full,
    })
}
