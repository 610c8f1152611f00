use crate::error::{Error, Result};
use crate::model::SparseVec;
use crate::scalar::Scalar;

/// One datapoint `(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint<S = f64> {
    pub features: SparseVec<S>,
    pub label: S,
}

impl<S: Scalar> DataPoint<S> {
    pub fn new(features: SparseVec<S>, label: S) -> Self {
        DataPoint { features, label }
    }

    /// Convenience constructor from a dense feature slice.
    pub fn dense(features: &[S], label: S) -> Self {
        DataPoint { features: SparseVec::from_dense(features), label }
    }
}

/// Immutable collection of `n >= 1` datapoints living in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<S = f64> {
    points: Vec<DataPoint<S>>,
    dim: usize,
}

impl<S: Scalar> Dataset<S> {
    pub fn new(points: Vec<DataPoint<S>>, dim: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("dataset must contain at least one point"));
        }
        if dim == 0 {
            return Err(Error::config("dataset dimension must be positive"));
        }
        for p in &points {
            let need = p.features.min_dim();
            if need > dim {
                return Err(Error::DimensionMismatch { expected: dim, found: need });
            }
        }
        Ok(Dataset { points, dim })
    }

    /// Builds a dataset from dense rows.
    pub fn from_dense(rows: &[Vec<S>], labels: &[S]) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), found: labels.len() });
        }
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::config("dense rows must share one length"));
        }
        let points = rows.iter().zip(labels).map(|(r, &y)| DataPoint::dense(r, y)).collect();
        Dataset::new(points, dim)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[DataPoint<S>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &DataPoint<S> {
        &self.points[i]
    }

    /// Squared feature norms `‖x_i‖²`.
    pub fn feature_norms_sq(&self) -> Vec<S> {
        self.points.iter().map(|p| p.features.norm_sq()).collect()
    }

    pub(crate) fn check_dim(&self, w: &[S]) -> Result<()> {
        if w.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: w.len() });
        }
        Ok(())
    }
}
