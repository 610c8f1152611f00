use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sparse vector in canonical form: strictly increasing indices, no stored zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec<S> {
    indices: Vec<usize>,
    values: Vec<S>,
}

impl<S: Scalar> SparseVec<S> {
    /// Builds a sparse vector from `(index, value)` pairs.
    ///
    /// Zero values are dropped. Indices must be strictly increasing.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, S)>,
    {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut last: Option<usize> = None;
        for (idx, val) in pairs {
            if let Some(prev) = last {
                if idx <= prev {
                    return Err(Error::contract(format!(
                        "sparse indices must be strictly increasing ({idx} after {prev})"
                    )));
                }
            }
            last = Some(idx);
            if val != S::zero() {
                indices.push(idx);
                values.push(val);
            }
        }
        Ok(SparseVec { indices, values })
    }

    /// Sparse view of a dense slice.
    pub fn from_dense(dense: &[S]) -> Self {
        let (indices, values) =
            dense.iter().enumerate().filter(|(_, v)| **v != S::zero()).map(|(i, v)| (i, *v)).unzip();
        SparseVec { indices, values }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Smallest dense length able to hold this vector.
    pub fn min_dim(&self) -> usize {
        self.indices.last().map_or(0, |i| i + 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, S)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Inner product with a dense vector, accumulated in `f64` over the support in index order.
    pub fn dot(&self, dense: &[S]) -> S {
        let acc: f64 = self.iter().map(|(i, v)| v.as_f64() * dense[i].as_f64()).sum();
        S::of(acc)
    }

    pub fn norm_sq(&self) -> S {
        S::of(self.values.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>())
    }

    /// `dense += coef * self`
    pub fn axpy_into(&self, coef: S, dense: &mut [S]) {
        for (i, v) in self.iter() {
            dense[i] = dense[i] + coef * v;
        }
    }

    /// Returns `coef * self`, dropping the support entirely when `coef` is zero.
    pub fn scaled(&self, coef: S) -> Self {
        if coef == S::zero() {
            return SparseVec::default();
        }
        let mut out = Vec::with_capacity(self.values.len());
        let mut idx = Vec::with_capacity(self.values.len());
        for (i, v) in self.iter() {
            let s = coef * v;
            if s != S::zero() {
                idx.push(i);
                out.push(s);
            }
        }
        SparseVec { indices: idx, values: out }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<S> {
        let mut out = vec![S::zero(); dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    /// Multiplies every stored value by `factor` in place.
    pub fn scale_in_place(&mut self, factor: S) {
        for v in &mut self.values {
            *v = *v * factor;
        }
        if factor == S::zero() {
            self.indices.clear();
            self.values.clear();
        }
    }
}
