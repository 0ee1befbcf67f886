use std::collections::HashSet;

use super::{check_finite, ExampleId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Raw proxy scores: one row per example, one column per internal seed.
///
/// Stored column-major since every within-seed stage works a column at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix<T> {
    example_ids: Vec<ExampleId>,
    seed_labels: Vec<u64>,
    columns: Vec<Vec<T>>,
}

impl<T: Scalar> ScoreMatrix<T> {
    pub fn from_columns(
        example_ids: Vec<ExampleId>,
        seed_labels: Vec<u64>,
        columns: Vec<Vec<T>>,
    ) -> Result<Self> {
        if example_ids.is_empty() {
            return Err(Error::invalid("score matrix needs at least one example"));
        }
        if columns.is_empty() {
            return Err(Error::invalid("score matrix needs at least one seed column"));
        }
        if seed_labels.len() != columns.len() {
            return Err(Error::invalid(format!(
                "{} seed labels for {} columns",
                seed_labels.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::with_capacity(example_ids.len());
        for id in &example_ids {
            if !seen.insert(*id) {
                return Err(Error::DuplicateId(*id));
            }
        }
        for (r, col) in columns.iter().enumerate() {
            if col.len() != example_ids.len() {
                return Err(Error::invalid(format!(
                    "column {r} has {} rows, expected {}",
                    col.len(),
                    example_ids.len()
                )));
            }
            check_finite(col).map_err(|e| match e {
                Error::NonFinite { index, value } => Error::invalid(format!(
                    "non-finite score {value} for example {} in column {r}",
                    example_ids[index]
                )),
                other => other,
            })?;
        }
        Ok(ScoreMatrix {
            example_ids,
            seed_labels,
            columns,
        })
    }

    /// Builds a matrix from row-major data (`rows[i][r]`).
    pub fn from_rows(
        example_ids: Vec<ExampleId>,
        seed_labels: Vec<u64>,
        rows: &[Vec<T>],
    ) -> Result<Self> {
        let width = seed_labels.len();
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
            return Err(Error::invalid(format!("row {i} does not have {width} entries")));
        }
        let columns = (0..width)
            .map(|r| rows.iter().map(|row| row[r]).collect())
            .collect();
        Self::from_columns(example_ids, seed_labels, columns)
    }

    #[inline]
    pub fn n_examples(&self) -> usize {
        self.example_ids.len()
    }

    #[inline]
    pub fn n_seeds(&self) -> usize {
        self.columns.len()
    }

    pub fn example_ids(&self) -> &[ExampleId] {
        &self.example_ids
    }

    pub fn seed_labels(&self) -> &[u64] {
        &self.seed_labels
    }

    pub fn column(&self, r: usize) -> &[T] {
        &self.columns[r]
    }

    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Keeps only the first `r` columns.
    pub fn truncate_seeds(&self, r: usize) -> Result<Self> {
        if r == 0 || r > self.n_seeds() {
            return Err(Error::invalid(format!(
                "cannot keep {r} of {} seed columns",
                self.n_seeds()
            )));
        }
        Ok(ScoreMatrix {
            example_ids: self.example_ids.clone(),
            seed_labels: self.seed_labels[..r].to_vec(),
            columns: self.columns[..r].to_vec(),
        })
    }

    /// Restricts the matrix to the given row indices, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let ids = rows.iter().map(|&i| self.example_ids[i]).collect();
        let columns = self
            .columns
            .iter()
            .map(|c| rows.iter().map(|&i| c[i]).collect())
            .collect();
        Self::from_columns(ids, self.seed_labels.clone(), columns)
    }
}
