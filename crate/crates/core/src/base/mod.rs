//! Shared data model: example ids, score matrices, rankings, cluster maps and
//! sparse feature vectors, plus the ranking primitives every pipeline uses.

mod clusters;
mod ids;
mod matrix;
mod ranking;
mod sparse;

pub use clusters::{ClusterMap, DenseClusters};
pub use ids::ExampleId;
pub use matrix::ScoreMatrix;
pub use ranking::{fractional_ranks, minmax_normalize, Direction, Ranking, DEFAULT_EPSILON};
pub use sparse::SparseVector;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) fn check_finite<T: Scalar>(values: &[T]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: values[index].to_f64_lossy(),
        }),
        None => Ok(()),
    }
}
