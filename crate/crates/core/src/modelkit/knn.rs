use std::collections::HashMap;

use rayon::prelude::*;

use crate::base::{minmax_normalize, SparseVector, DEFAULT_EPSILON};
use crate::error::{Error, Result};

/// Mean cosine distance (`1 - cos`) from each vector to its `k` nearest
/// neighbours, self excluded. `k` is clipped to `n - 1`. A zero vector has
/// cosine 0, hence distance 1, to everything.
pub fn knn_raw_distances(vectors: &[SparseVector], k: usize) -> Result<Vec<f64>> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::invalid("kNN distances need at least 2 examples"));
    }
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let k = k.min(n - 1);
    let normed: Vec<SparseVector> = vectors.iter().map(SparseVector::normalized).collect();
    let mut postings: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
    for (i, v) in normed.iter().enumerate() {
        for (f, x) in v.iter() {
            postings.entry(f).or_default().push((i, x));
        }
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut sims = vec![0.0; n];
            for (f, x) in normed[i].iter() {
                for &(j, y) in &postings[&f] {
                    sims[j] += x * y;
                }
            }
            sims[i] = f64::NEG_INFINITY;
            sims.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
            sims[..k].iter().map(|s| 1.0 - s.clamp(-1.0, 1.0)).sum::<f64>() / k as f64
        })
        .collect())
}

/// [`knn_raw_distances`] min-max normalized to `[0, 1]` across the dataset.
pub fn knn_mean_cosine_distance(vectors: &[SparseVector], k: usize) -> Result<Vec<f64>> {
    minmax_normalize(&knn_raw_distances(vectors, k)?, DEFAULT_EPSILON)
}
