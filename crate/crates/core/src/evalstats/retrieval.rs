use std::cmp::Ordering;

use crate::base::fractional_ranks;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Area under the ROC curve via the Mann-Whitney statistic:
/// `P(score_pos > score_neg) + P(tie) / 2`.
///
/// `scores` must already be oriented so that larger means "more likely
/// positive" (for noisy-label retrieval: negate the proxy scores first).
pub fn auroc<T: Scalar>(scores: &[T], positives: &[bool]) -> Result<T> {
    if scores.len() != positives.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("AUROC needs at least one positive and one negative"));
    }
    let ranks = fractional_ranks(scores)?;
    let rank_sum: T = ranks
        .iter()
        .zip(positives)
        .filter(|(_, &p)| p)
        .map(|(&r, _)| r)
        .sum();
    let np = T::of_usize(n_pos);
    let u = rank_sum - np * (np + T::one()) / T::of(2.0);
    Ok(u / (np * T::of_usize(n_neg)))
}

/// Precision and recall among the `k` highest-scoring items (ties broken by
/// lower index first).
pub fn precision_recall_at_k<T: Scalar>(scores: &[T], positives: &[bool], k: usize) -> Result<(T, T)> {
    if scores.len() != positives.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    if k == 0 || k > scores.len() {
        return Err(Error::invalid(format!("k = {k} outside 1..={}", scores.len())));
    }
    let total = positives.iter().filter(|&&p| p).count();
    if total == 0 {
        return Err(Error::invalid("recall is undefined without positives"));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let hits = idx[..k].iter().filter(|&&i| positives[i]).count();
    Ok((
        T::of_usize(hits) / T::of_usize(k),
        T::of_usize(hits) / T::of_usize(total),
    ))
}
