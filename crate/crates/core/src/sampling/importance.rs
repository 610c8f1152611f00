use rand::Rng;

use crate::error::{Error, Result};
use crate::model::SmoothnessProfile;
use crate::sampling::WeightTree;
use crate::scalar::{normalize_with_floor, Scalar};

/// Entries that are zero are lifted to this mass before normalization.
pub const IS_FLOOR: f64 = 1e-12;

/// Fixed importance-sampling distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct IsState<S = f64> {
    p: Vec<S>,
    tree: WeightTree<S>,
}

impl<S: Scalar> IsState<S> {
    /// `p_i ∝ mass_i`, with zero masses lifted to a tiny positive value.
    pub fn from_mass(mass: &[S]) -> Result<Self> {
        if mass.iter().any(|m| !(*m >= S::zero()) || !m.is_finite()) {
            return Err(Error::config("importance masses must be finite and nonnegative"));
        }
        let p = normalize_with_floor(mass, S::of(IS_FLOOR))
            .ok_or_else(|| Error::config("importance masses are all zero"))?;
        let tree = WeightTree::build(&p)?;
        Ok(IsState { p, tree })
    }

    /// `p_i = L_i / Σ L_j`
    pub fn from_smoothness(profile: &SmoothnessProfile<S>) -> Result<Self> {
        Self::from_mass(&profile.per_point)
    }

    /// `p_i = √a_i / Σ √a_j`, the minimizer of `Σ a_i / p_i`.
    pub fn from_bounds(a: &[S]) -> Result<Self> {
        if a.iter().any(|v| !(*v >= S::zero())) {
            return Err(Error::config("reward bounds must be nonnegative"));
        }
        let roots: Vec<S> = a.iter().map(|v| v.sqrt()).collect();
        Self::from_mass(&roots)
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn probabilities(&self) -> &[S] {
        &self.p
    }

    pub fn probability(&self, i: usize) -> S {
        self.p[i]
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, S) {
        let u = S::of(rng.random::<f64>()) * self.tree.total();
        let i = self.tree.sample_counted(u).0;
        (i, self.p[i])
    }
}
