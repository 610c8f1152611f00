//! Sub-cost families, regularizers and their first-order oracles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DataPoint, Dataset, SparseVec};
use crate::scalar::Scalar;

/// Per-datapoint loss `φ_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    /// `log(1 + exp(-y⟨x,w⟩))`
    Logistic,
    /// `([1 - y⟨x,w⟩]₊)²`
    SquaredHinge,
    /// `½(⟨x,w⟩ - y)²`
    Ridge,
}

impl Loss {
    /// Whether labels are expected to be `±1`.
    pub fn is_classification(self) -> bool {
        !matches!(self, Loss::Ridge)
    }
}

/// Regularizer `r(w)`. `L2` stands for `½‖w‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularizer {
    L1,
    L2,
    None,
}

/// Objective `F(w) = (1/n) Σ φ_i(w) + λ r(w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec<S = f64> {
    pub loss: Loss,
    pub regularizer: Regularizer,
    pub lambda: S,
    /// Bound `R` on `‖w‖` used to bound gradients of losses whose gradient is unbounded.
    pub iterate_bound: Option<S>,
}

pub const DEFAULT_ITERATE_BOUND: f64 = 10.0;

impl<S: Scalar> ProblemSpec<S> {
    pub fn new(loss: Loss, regularizer: Regularizer, lambda: S) -> Result<Self> {
        if !(lambda >= S::zero()) || !lambda.is_finite() {
            return Err(Error::config(format!("lambda must be finite and nonnegative, got {lambda}")));
        }
        Ok(ProblemSpec { loss, regularizer, lambda, iterate_bound: Some(S::of(DEFAULT_ITERATE_BOUND)) })
    }

    pub fn with_iterate_bound(mut self, bound: Option<S>) -> Self {
        self.iterate_bound = bound;
        self
    }

    /// Scalar `c` such that `∇φ_i(w) = c · x_i`; every supported loss is a function of `⟨x_i,w⟩`.
    pub fn gradient_coefficient(&self, point: &DataPoint<S>, w: &[S]) -> Result<S> {
        check_point(point, w)?;
        Ok(self.coefficient_at_margin(point.features.dot(w), point.label))
    }

    pub(crate) fn coefficient_at_margin(&self, inner: S, y: S) -> S {
        let one = S::one();
        match self.loss {
            Loss::Logistic => -y * sigmoid(-y * inner),
            Loss::SquaredHinge => {
                let slack = one - y * inner;
                if slack > S::zero() {
                    -(one + one) * y * slack
                } else {
                    S::zero()
                }
            }
            Loss::Ridge => inner - y,
        }
    }

    fn cost_at_margin(&self, inner: S, y: S) -> S {
        let one = S::one();
        match self.loss {
            Loss::Logistic => softplus(-y * inner),
            Loss::SquaredHinge => {
                let slack = one - y * inner;
                if slack > S::zero() {
                    slack * slack
                } else {
                    S::zero()
                }
            }
            Loss::Ridge => {
                let r = inner - y;
                S::of(0.5) * r * r
            }
        }
    }

    /// `φ_i(w)`
    pub fn sub_cost(&self, point: &DataPoint<S>, w: &[S]) -> Result<S> {
        check_point(point, w)?;
        Ok(self.cost_at_margin(point.features.dot(w), point.label))
    }

    /// `∇φ_i(w)`, supported on the point's features.
    pub fn sub_gradient(&self, point: &DataPoint<S>, w: &[S]) -> Result<SparseVec<S>> {
        let c = self.gradient_coefficient(point, w)?;
        Ok(point.features.scaled(c))
    }

    /// `r(w)`
    pub fn reg_value(&self, w: &[S]) -> S {
        match self.regularizer {
            Regularizer::L1 => S::of(w.iter().map(|v| v.abs().as_f64()).sum::<f64>()),
            Regularizer::L2 => S::of(0.5) * crate::scalar::norm_sq(w),
            Regularizer::None => S::zero(),
        }
    }

    /// `F(w)`
    pub fn full_cost(&self, data: &Dataset<S>, w: &[S]) -> Result<S> {
        Ok(self.smooth_cost(data, w)? + self.lambda * self.reg_value(w))
    }

    /// `f(w) = (1/n) Σ φ_i(w)`, the objective without the regularizer.
    pub fn smooth_cost(&self, data: &Dataset<S>, w: &[S]) -> Result<S> {
        data.check_dim(w)?;
        let sum: f64 = data.points().iter().map(|p| self.cost_at_margin(p.features.dot(w), p.label).as_f64()).sum();
        Ok(S::of(sum / data.len() as f64))
    }

    /// `∇f(w)`, the mean sub-gradient without the regularizer.
    pub fn full_gradient(&self, data: &Dataset<S>, w: &[S]) -> Result<Vec<S>> {
        data.check_dim(w)?;
        let mut acc = vec![0.0f64; data.dim()];
        for p in data.points() {
            let c = self.coefficient_at_margin(p.features.dot(w), p.label).as_f64();
            if c != 0.0 {
                for (i, v) in p.features.iter() {
                    acc[i] += c * v.as_f64();
                }
            }
        }
        let n = data.len() as f64;
        Ok(acc.into_iter().map(|v| S::of(v / n)).collect())
    }

    /// Gradient coefficients of every point at `w`.
    pub fn all_coefficients(&self, data: &Dataset<S>, w: &[S]) -> Result<Vec<S>> {
        data.check_dim(w)?;
        Ok(data.points().iter().map(|p| self.coefficient_at_margin(p.features.dot(w), p.label)).collect())
    }

    /// A subgradient of `r` at `w`, using `sign(0) = 0` for L1.
    pub fn reg_subgradient(&self, w: &[S]) -> Vec<S> {
        match self.regularizer {
            Regularizer::L1 => w.iter().map(|&v| sign(v)).collect(),
            Regularizer::L2 => w.to_vec(),
            Regularizer::None => vec![S::zero(); w.len()],
        }
    }

    /// `argmin_u λ r(u) + ‖u - v‖² / (2·step)`
    pub fn prox(&self, v: &[S], step: S) -> Result<Vec<S>> {
        let mut out = v.to_vec();
        self.prox_in_place(&mut out, step)?;
        Ok(out)
    }

    pub fn prox_in_place(&self, v: &mut [S], step: S) -> Result<()> {
        if !(step > S::zero()) {
            return Err(Error::contract(format!("prox step must be positive, got {step}")));
        }
        let shrink = step * self.lambda;
        match self.regularizer {
            Regularizer::L1 => {
                for x in v.iter_mut() {
                    *x = soft_threshold(*x, shrink);
                }
            }
            Regularizer::L2 => {
                let denom = S::one() + shrink;
                for x in v.iter_mut() {
                    *x = *x / denom;
                }
            }
            Regularizer::None => {}
        }
        Ok(())
    }

    /// Smoothness constant `L_i` of one sub-cost.
    pub fn smoothness(&self, point: &DataPoint<S>) -> S {
        let sq = point.features.norm_sq();
        match self.loss {
            Loss::Ridge => sq,
            Loss::SquaredHinge => S::of(2.0) * sq,
            Loss::Logistic => sq / S::of(4.0),
        }
    }

    pub fn smoothness_profile(&self, data: &Dataset<S>) -> SmoothnessProfile<S> {
        SmoothnessProfile::from_constants(data.points().iter().map(|p| self.smoothness(p)).collect())
    }

    /// Bound `G_i ≥ sup ‖∇φ_i(w)‖` over the admissible iterates.
    pub fn gradient_bound(&self, point: &DataPoint<S>) -> Result<S> {
        let norm = point.features.norm_sq().sqrt();
        match self.loss {
            Loss::Logistic => Ok(norm),
            Loss::Ridge => {
                let r = self.require_bound()?;
                Ok(norm * (r * norm + point.label.abs()))
            }
            Loss::SquaredHinge => {
                let r = self.require_bound()?;
                Ok(S::of(2.0) * norm * (S::one() + r * norm))
            }
        }
    }

    /// Per-point reward bounds `a_i = G_i² / n²`.
    pub fn reward_bounds(&self, data: &Dataset<S>) -> Result<Vec<S>> {
        let n2 = S::of_usize(data.len()).powi(2);
        data.points().iter().map(|p| self.gradient_bound(p).map(|g| g * g / n2)).collect()
    }

    fn require_bound(&self) -> Result<S> {
        match self.iterate_bound {
            Some(r) if r >= S::zero() && r.is_finite() => Ok(r),
            Some(r) => Err(Error::config(format!("iterate bound must be finite and nonnegative, got {r}"))),
            None => Err(Error::config(format!(
                "{:?} loss has unbounded gradients; an iterate-norm bound R is required",
                self.loss
            ))),
        }
    }
}

/// Per-point smoothness constants with their summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessProfile<S = f64> {
    pub per_point: Vec<S>,
    pub max: S,
    pub mean: S,
    /// `max / mean`
    pub tau: S,
}

impl<S: Scalar> SmoothnessProfile<S> {
    pub fn from_constants(per_point: Vec<S>) -> Self {
        let max = per_point.iter().copied().fold(S::zero(), S::max);
        let mean = S::of(per_point.iter().map(|v| v.as_f64()).sum::<f64>() / per_point.len() as f64);
        let tau = if mean > S::zero() { max / mean } else { S::one() };
        SmoothnessProfile { per_point, max, mean, tau }
    }
}

fn check_point<S: Scalar>(point: &DataPoint<S>, w: &[S]) -> Result<()> {
    let need = point.features.min_dim();
    if need > w.len() {
        return Err(Error::DimensionMismatch { expected: need, found: w.len() });
    }
    Ok(())
}

/// Numerically stable `1 / (1 + exp(-z))`.
pub(crate) fn sigmoid<S: Scalar>(z: S) -> S {
    let one = S::one();
    if z >= S::zero() {
        one / (one + (-z).exp())
    } else {
        let e = z.exp();
        e / (one + e)
    }
}

/// Numerically stable `log(1 + exp(z))`.
pub(crate) fn softplus<S: Scalar>(z: S) -> S {
    z.max(S::zero()) + (-z.abs()).exp().ln_1p()
}

fn sign<S: Scalar>(v: S) -> S {
    if v > S::zero() {
        S::one()
    } else if v < S::zero() {
        -S::one()
    } else {
        S::zero()
    }
}

pub(crate) fn soft_threshold<S: Scalar>(v: S, t: S) -> S {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        S::zero()
    }
}
