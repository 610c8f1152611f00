//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating point type the optimizers, samplers and metrics are generic over.
///
/// Implemented for `f32` and `f64`. Inner products always accumulate in `f64`
/// regardless of the storage type.
pub trait Scalar: Float + FromPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` constant. Values outside the range of `Self` saturate to infinity.
    fn of(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(|| if v > 0.0 { Self::infinity() } else { Self::neg_infinity() })
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn of_usize(v: usize) -> Self {
        Self::of(v as f64)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dense inner product accumulated in double precision.
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    S::of(a.iter().zip(b).map(|(x, y)| x.as_f64() * y.as_f64()).sum::<f64>())
}

pub fn norm_sq<S: Scalar>(a: &[S]) -> S {
    S::of(a.iter().map(|x| x.as_f64() * x.as_f64()).sum::<f64>())
}

/// Normalizes nonnegative masses into a distribution, lifting zero entries to `floor` first.
///
/// Returns `None` when no entry is positive.
pub fn normalize_with_floor<S: Scalar>(mass: &[S], floor: S) -> Option<Vec<S>> {
    if !mass.iter().any(|m| *m > S::zero()) {
        return None;
    }
    let lifted: Vec<S> = mass.iter().map(|&m| if m > S::zero() { m } else { floor }).collect();
    let total = S::of(lifted.iter().map(|m| m.as_f64()).sum::<f64>());
    Some(lifted.into_iter().map(|m| m / total).collect())
}
