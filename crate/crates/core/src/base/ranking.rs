use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{check_finite, ExampleId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Denominator guard for min-max normalization.
pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Sort direction for turning scores into a ranking.
///
/// Higher proxy scores mean "better" examples throughout the crate, so
/// `Descending` is the default; suspicious-example orderings ask for
/// `Ascending` explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Descending,
    Ascending,
}

/// Total order over example ids, position 0 first.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking<T> {
    order: Vec<ExampleId>,
    /// Score at each position, when the ranking came from scores.
    scores: Option<Vec<T>>,
}

impl<T: Scalar> Ranking<T> {
    /// Sorts `ids` by `scores`. Ties break by ascending id, so the result is a
    /// deterministic function of its inputs.
    pub fn from_scores(ids: &[ExampleId], scores: &[T], direction: Direction) -> Result<Self> {
        if ids.len() != scores.len() {
            let missing = ids.get(scores.len()).copied().unwrap_or_default();
            return Err(if ids.len() > scores.len() {
                Error::MissingScore(missing)
            } else {
                Error::invalid(format!("{} scores for {} ids", scores.len(), ids.len()))
            });
        }
        check_finite(scores)?;
        ensure_unique(ids)?;
        let mut idx: Vec<usize> = (0..ids.len()).collect();
        idx.sort_by(|&a, &b| {
            let by_score = match direction {
                Direction::Descending => scores[b].partial_cmp(&scores[a]),
                Direction::Ascending => scores[a].partial_cmp(&scores[b]),
            }
            .unwrap_or(Ordering::Equal);
            by_score.then(ids[a].cmp(&ids[b]))
        });
        Ok(Ranking {
            order: idx.iter().map(|&i| ids[i]).collect(),
            scores: Some(idx.iter().map(|&i| scores[i]).collect()),
        })
    }

    /// Same as [`Ranking::from_scores`] but from `(id, score)` pairs.
    pub fn from_pairs(pairs: &[(ExampleId, T)], direction: Direction) -> Result<Self> {
        let ids: Vec<_> = pairs.iter().map(|p| p.0).collect();
        let scores: Vec<_> = pairs.iter().map(|p| p.1).collect();
        Self::from_scores(&ids, &scores, direction)
    }

    pub fn from_order(order: Vec<ExampleId>) -> Result<Self> {
        ensure_unique(&order)?;
        Ok(Ranking { order, scores: None })
    }

    pub(crate) fn from_parts_unchecked(order: Vec<ExampleId>, scores: Option<Vec<T>>) -> Self {
        Ranking { order, scores }
    }

    /// Attaches per-position scores to an existing order.
    pub fn with_scores(order: Vec<ExampleId>, scores: Vec<T>) -> Result<Self> {
        if order.len() != scores.len() {
            return Err(Error::invalid("order and scores differ in length"));
        }
        ensure_unique(&order)?;
        Ok(Ranking {
            order,
            scores: Some(scores),
        })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[ExampleId] {
        &self.order
    }

    pub fn scores(&self) -> Option<&[T]> {
        self.scores.as_deref()
    }

    pub fn top(&self, k: usize) -> &[ExampleId] {
        &self.order[..k.min(self.order.len())]
    }

    pub fn bottom(&self, k: usize) -> &[ExampleId] {
        &self.order[self.order.len() - k.min(self.order.len())..]
    }

    /// Position of every id (0 = first).
    pub fn positions(&self) -> HashMap<ExampleId, usize> {
        self.order.iter().enumerate().map(|(p, &id)| (id, p)).collect()
    }

    /// Strictly decreasing synthetic scores (`n - position`) that reproduce
    /// this order under [`Direction::Descending`].
    pub fn to_scores(&self) -> (Vec<ExampleId>, Vec<T>) {
        let n = self.order.len();
        (
            self.order.clone(),
            (0..n).map(|p| T::of_usize(n - p)).collect(),
        )
    }
}

fn ensure_unique(ids: &[ExampleId]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(*id) {
            return Err(Error::DuplicateId(*id));
        }
    }
    Ok(())
}

/// Within-run min-max normalization: `(s - min) / (max - min + epsilon)`.
///
/// Constant inputs map to all zeros.
pub fn minmax_normalize<T: Scalar>(scores: &[T], epsilon: T) -> Result<Vec<T>> {
    if scores.is_empty() {
        return Err(Error::invalid("cannot normalize an empty score vector"));
    }
    if !(epsilon > T::zero()) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    check_finite(scores)?;
    let (lo, hi) = scores
        .iter()
        .fold((scores[0], scores[0]), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    let denom = hi - lo + epsilon;
    Ok(scores.iter().map(|&s| (s - lo) / denom).collect())
}

/// 1-based ranks, smallest value first; tied values share the mean of the
/// ranks they span.
pub fn fractional_ranks<T: Scalar>(values: &[T]) -> Result<Vec<T>> {
    check_finite(values)?;
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![T::zero(); n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let mean = T::of((start + 1 + end) as f64 / 2.0);
        for &i in &idx[start..end] {
            ranks[i] = mean;
        }
        start = end;
    }
    Ok(ranks)
}
