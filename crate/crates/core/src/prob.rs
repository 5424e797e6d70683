//! Probability vectors and matrices on the simplex.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums may deviate from 1 by at most this much and still be considered
/// valid simplex points.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Checks that `p` is a point in the probability simplex: finite entries in
/// `[0, 1]` summing to 1 within `tol`.
pub fn is_simplex(p: &[f64], tol: f64) -> bool {
    if p.is_empty() {
        return false;
    }
    let mut sum = 0.0;
    for &v in p {
        if !v.is_finite() || v < 0.0 || v > 1.0 + tol {
            return false;
        }
        sum += v;
    }
    (sum - 1.0).abs() <= tol
}

/// Validates a simplex point at the default tolerance.
pub fn validate_simplex(p: &[f64]) -> Result<()> {
    if is_simplex(p, SIMPLEX_TOL) {
        Ok(())
    } else {
        Err(Error::Validation {
            id: None,
            message: format!("not a probability vector: {p:?}"),
        })
    }
}

/// Dense row-major N×K matrix of probability vectors.
///
/// Every row is a point in the simplex; construction validates this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbMatrix {
    data: Vec<f64>,
    n_rows: usize,
    n_classes: usize,
}

impl ProbMatrix {
    /// Builds a matrix from rows, validating each against [`SIMPLEX_TOL`].
    pub fn from_rows(rows: Vec<Vec<f64>>, n_classes: usize) -> Result<Self> {
        let n_rows = rows.len();
        let mut data = Vec::with_capacity(n_rows * n_classes);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_classes {
                return Err(Error::Validation {
                    id: Some(i.to_string()),
                    message: format!("row has {} entries, expected {}", row.len(), n_classes),
                });
            }
            if !is_simplex(row, SIMPLEX_TOL) {
                return Err(Error::Validation {
                    id: Some(i.to_string()),
                    message: format!("row is not a probability vector: {row:?}"),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { data, n_rows, n_classes })
    }

    /// Builds a matrix without re-validating rows. The caller must guarantee
    /// every row already lies on the simplex.
    pub(crate) fn from_rows_unchecked(rows: Vec<Vec<f64>>, n_classes: usize) -> Self {
        let n_rows = rows.len();
        let mut data = Vec::with_capacity(n_rows * n_classes);
        for row in rows {
            debug_assert_eq!(row.len(), n_classes);
            data.extend_from_slice(&row);
        }
        Self { data, n_rows, n_classes }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_classes..(i + 1) * self.n_classes]
    }

    /// Iterator over rows in index order.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_classes)
    }
}
