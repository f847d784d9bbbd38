//! Dense feature matrices with explicit missing cells.

use serde::{Deserialize, Serialize};

/// Row-major matrix of `f64` where `NaN` marks a missing cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(
            values.len(),
            n_rows * n_cols,
            "value buffer does not match dimensions"
        );
        Self {
            n_rows,
            n_cols,
            values,
        }
    }

    /// Build from optional-valued rows; `None` becomes `NaN`.
    pub fn from_rows(rows: &[Vec<Option<f64>>], n_cols: usize) -> Self {
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for row in rows {
            assert_eq!(row.len(), n_cols, "row width mismatch");
            values.extend(row.iter().map(|v| v.unwrap_or(f64::NAN)));
        }
        Self {
            n_rows: rows.len(),
            n_cols,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.n_cols + col] = value;
    }

    #[inline]
    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.get(row, col).is_nan()
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols)
    }

    /// New matrix containing the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> DenseMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.n_cols);
        for &r in indices {
            values.extend_from_slice(self.row(r));
        }
        DenseMatrix {
            n_rows: indices.len(),
            n_cols: self.n_cols,
            values,
        }
    }

    /// Apply `f` to every non-missing cell of one column.
    pub fn map_column(&mut self, col: usize, f: impl Fn(f64) -> f64) {
        for r in 0..self.n_rows {
            let v = self.get(r, col);
            if !v.is_nan() {
                self.set(r, col, f(v));
            }
        }
    }
}
