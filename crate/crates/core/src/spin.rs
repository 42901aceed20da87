//! Spin-valued sample matrices.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{RbmError, Result};

/// A batch of spin configurations, one sample per row, every entry exactly -1 or +1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinBatch {
    data: Array2<i8>,
}

impl SpinBatch {
    /// Validates that every entry is a spin.
    pub fn new(data: Array2<i8>) -> Result<Self> {
        for ((row, col), &value) in data.indexed_iter() {
            if value != 1 && value != -1 {
                return Err(RbmError::InvalidSpin { row, col, value });
            }
        }
        Ok(SpinBatch { data })
    }

    /// Caller guarantees every entry is +-1.
    pub(crate) fn from_trusted(data: Array2<i8>) -> Self {
        debug_assert!(data.iter().all(|&s| s == 1 || s == -1));
        SpinBatch { data }
    }

    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let mut data = Array2::zeros((rows.len(), n));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(RbmError::shape("SpinBatch::from_rows", n, row.len()));
            }
            data.row_mut(i).assign(&ArrayView1::from(row.as_slice()));
        }
        SpinBatch::new(data)
    }

    /// `rows` copies of the same configuration.
    pub fn repeat(spins: &[i8], rows: usize) -> Result<Self> {
        let mut data = Array2::zeros((rows, spins.len()));
        for mut row in data.rows_mut() {
            row.assign(&ArrayView1::from(spins));
        }
        SpinBatch::new(data)
    }

    pub fn filled(rows: usize, cols: usize, spin: i8) -> Result<Self> {
        SpinBatch::new(Array2::from_elem((rows, cols), spin))
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    /// Number of units per sample.
    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, i8> {
        self.data.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, i8> {
        self.data.row(i)
    }

    pub fn into_inner(self) -> Array2<i8> {
        self.data
    }

    pub fn to_f64(&self) -> Array2<f64> {
        self.data.mapv(f64::from)
    }

    /// Rows `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> SpinBatch {
        SpinBatch {
            data: self.data.select(Axis(0), indices),
        }
    }

    /// The first `n` rows (or all of them if fewer).
    pub fn head(&self, n: usize) -> SpinBatch {
        let n = n.min(self.len());
        SpinBatch {
            data: self.data.slice(ndarray::s![..n, ..]).to_owned(),
        }
    }

    pub fn column_mean(&self) -> Array1<f64> {
        self.to_f64()
            .mean_axis(Axis(0))
            .unwrap_or_else(|| Array1::zeros(self.width()))
    }

    pub(crate) fn require_nonempty(&self, context: &'static str) -> Result<()> {
        if self.is_empty() {
            Err(RbmError::EmptyBatch(context))
        } else {
            Ok(())
        }
    }
}
