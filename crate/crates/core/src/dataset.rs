use nalgebra::{DMatrix, RowDVector};

use crate::error::{Error, Result};

/// An `n x d` point set whose row order is the collection order along the
/// candidate loop. Every operation in the crate preserves row order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedDataset {
    points: DMatrix<f64>,
}

impl OrderedDataset {
    pub const MIN_POINTS: usize = 3;

    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.nrows() < Self::MIN_POINTS {
            return Err(Error::InvalidDataset(format!(
                "need at least {} rows, got {}",
                Self::MIN_POINTS,
                points.nrows()
            )));
        }
        if points.ncols() == 0 {
            return Err(Error::InvalidDataset("need at least one column".into()));
        }
        if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
            // column-major storage
            let (row, col) = (pos % points.nrows(), pos / points.nrows());
            return Err(Error::InvalidDataset(format!(
                "non-finite entry at row {row}, column {col}"
            )));
        }
        Ok(Self { points })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::RaggedRows {
                row,
                expected: d,
                found: r.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn row(&self, i: usize) -> RowDVector<f64> {
        self.points.row(i).into_owned()
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.points
    }

    /// Returns the dataset with rows reordered so that row `i` of the result
    /// is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let p = &self.points;
        Self {
            points: DMatrix::from_fn(p.nrows(), p.ncols(), |i, j| p[(perm[i], j)]),
        }
    }
}
