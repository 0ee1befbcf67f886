use std::collections::HashSet;

use crate::base::{fractional_ranks, ExampleId, Ranking};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Spearman correlation: Pearson correlation of fractional ranks.
///
/// Fewer than two values or a constant input has no defined correlation and
/// yields [`Error::DegenerateCorrelation`].
pub fn spearman<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("{} vs {} values", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::DegenerateCorrelation("fewer than two values"));
    }
    pearson(&fractional_ranks(a)?, &fractional_ranks(b)?)
}

fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    let n = T::of_usize(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&xi, &yi) in x.iter().zip(y) {
        let (dx, dy) = (xi - mx, yi - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return Err(Error::DegenerateCorrelation("zero rank variance"));
    }
    Ok((sxy / (sxx * syy).sqrt()).max(-T::one()).min(T::one()))
}

/// Spearman correlation between two rankings of the same id set, using
/// positions as ranks.
pub fn spearman_rankings<T: Scalar, U>(a: &Ranking<U>, b: &Ranking<U>) -> Result<T>
where
    U: Scalar,
{
    if a.len() != b.len() {
        return Err(Error::invalid("rankings cover different numbers of ids"));
    }
    let pos_b = b.positions();
    let mut ra = Vec::with_capacity(a.len());
    let mut rb = Vec::with_capacity(a.len());
    for (p, id) in a.order().iter().enumerate() {
        let q = pos_b.get(id).ok_or(Error::UnknownId(*id))?;
        ra.push(T::of_usize(p));
        rb.push(T::of_usize(*q));
    }
    if ra.len() < 2 {
        return Err(Error::DegenerateCorrelation("fewer than two values"));
    }
    pearson(&ra, &rb)
}

/// Spearman correlation of every unordered pair `(i, j)`, `i < j`.
pub fn pairwise_values<T: Scalar, U: Scalar>(rankings: &[Ranking<U>]) -> Result<Vec<T>> {
    if rankings.len() < 2 {
        return Err(Error::invalid("stability needs at least two rankings"));
    }
    let mut out = Vec::new();
    for i in 0..rankings.len() {
        for j in i + 1..rankings.len() {
            out.push(spearman_rankings(&rankings[i], &rankings[j])?);
        }
    }
    Ok(out)
}

/// Mean pairwise Spearman correlation across rankings.
pub fn pairwise_stability<T: Scalar, U: Scalar>(rankings: &[Ranking<U>]) -> Result<T> {
    let v: Vec<T> = pairwise_values(rankings)?;
    Ok(v.iter().copied().sum::<T>() / T::of_usize(v.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Top,
    Bottom,
}

pub fn jaccard_ids(a: &[ExampleId], b: &[ExampleId]) -> f64 {
    let sa: HashSet<_> = a.iter().collect();
    let sb: HashSet<_> = b.iter().collect();
    let inter = sa.intersection(&sb).count();
    let union = sa.len() + sb.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Jaccard overlap of the first (or last) `k` ids of two rankings.
pub fn topk_jaccard<T: Scalar>(a: &Ranking<T>, b: &Ranking<T>, k: usize, end: End) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > a.len() || k > b.len() {
        return Err(Error::invalid(format!("k = {k} exceeds the ranking length")));
    }
    Ok(match end {
        End::Top => jaccard_ids(a.top(k), b.top(k)),
        End::Bottom => jaccard_ids(a.bottom(k), b.bottom(k)),
    })
}

/// Mean pairwise Jaccard overlap of the top `floor(budget * n)` ids.
pub fn subset_overlap<T: Scalar>(rankings: &[Ranking<T>], budget: f64) -> Result<f64> {
    if !(budget > 0.0 && budget <= 1.0) {
        return Err(Error::Config(format!("budget {budget} outside (0, 1]")));
    }
    if rankings.len() < 2 {
        return Err(Error::invalid("subset overlap needs at least two rankings"));
    }
    let n = rankings[0].len();
    let k = crate::textgen::count_for_rate(budget, n);
    if k == 0 {
        return Err(Error::invalid(format!("budget {budget} selects nothing from {n} examples")));
    }
    let mut sum = 0.0;
    let mut pairs = 0;
    for i in 0..rankings.len() {
        for j in i + 1..rankings.len() {
            sum += topk_jaccard(&rankings[i], &rankings[j], k, End::Top)?;
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

/// Cross-run spread (`max - min`) of retained-subset utility.
pub fn selection_gap<T: Scalar>(utilities: &[T]) -> Result<T> {
    if utilities.len() < 2 {
        return Err(Error::invalid("selection gap needs at least two runs"));
    }
    let lo = utilities.iter().copied().fold(T::infinity(), T::min);
    let hi = utilities.iter().copied().fold(T::neg_infinity(), T::max);
    Ok(hi - lo)
}

/// Stability summary for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub mean_pairwise_spearman: f64,
    pub topk_jaccard: f64,
    pub bottomk_jaccard: f64,
    pub subset_overlap: f64,
    pub selection_gap: Option<f64>,
    /// Spearman value for every unordered pair of rankings.
    pub pair_values: Vec<f64>,
}

impl StabilityReport {
    pub fn compute(
        rankings: &[Ranking<f64>],
        k: usize,
        budget: f64,
        utilities: Option<&[f64]>,
    ) -> Result<Self> {
        let pair_values: Vec<f64> = pairwise_values(rankings)?;
        let mut top = 0.0;
        let mut bottom = 0.0;
        for i in 0..rankings.len() {
            for j in i + 1..rankings.len() {
                top += topk_jaccard(&rankings[i], &rankings[j], k, End::Top)?;
                bottom += topk_jaccard(&rankings[i], &rankings[j], k, End::Bottom)?;
            }
        }
        let pairs = pair_values.len() as f64;
        Ok(StabilityReport {
            mean_pairwise_spearman: pair_values.iter().sum::<f64>() / pairs,
            topk_jaccard: top / pairs,
            bottomk_jaccard: bottom / pairs,
            subset_overlap: subset_overlap(rankings, budget)?,
            selection_gap: utilities.map(selection_gap).transpose()?,
            pair_values,
        })
    }
}
