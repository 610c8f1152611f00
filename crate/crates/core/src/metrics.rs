//! Variance measures, optimal sampling distributions and the regret-bound checks.
//!
//! All quantities are accumulated and returned in `f64` regardless of the
//! working scalar of the run that produced them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, ProblemSpec};
use crate::optimize::EstimatorState;
use crate::sampling::mabs_t_condition;
use crate::scalar::Scalar;

/// Mass given to zero entries before normalizing an optimal distribution.
pub const OPTIMAL_FLOOR: f64 = 1e-12;

/// Additive constant of the default regret bound.
pub const DEFAULT_BOUND_CONSTANT: f64 = 50.0;

/// Tolerance used by the inequality checks.
pub const CHECK_TOLERANCE: f64 = 1e-9;

/// `V = V_e - V_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub effective: f64,
    pub centering: f64,
    pub pseudo: f64,
}

/// `V_e(p) = Σ a_i / p_i`. Terms with `a_i = 0` contribute nothing.
pub fn effective_variance<S: Scalar>(a: &[S], p: &[S]) -> Result<f64> {
    check_lengths(a.len(), p.len())?;
    let mut total = 0.0;
    for (i, (ai, pi)) in a.iter().zip(p).enumerate() {
        let (ai, pi) = (ai.as_f64(), pi.as_f64());
        if ai == 0.0 {
            continue;
        }
        if !(pi > 0.0) {
            return Err(Error::InfiniteVariance { index: i, a: ai });
        }
        total += ai / pi;
    }
    Ok(total)
}

/// `∇V_e(p)_i = -a_i / p_i²`
pub fn effective_variance_gradient<S: Scalar>(a: &[S], p: &[S]) -> Vec<f64> {
    a.iter().zip(p).map(|(ai, pi)| -ai.as_f64() / pi.as_f64().powi(2)).collect()
}

/// Splits the second moment of an estimator with reward bases `a` and mean correction `m`.
pub fn variance_report<S: Scalar>(a: &[S], p: &[S], mean_correction: &[S]) -> Result<VarianceReport> {
    let effective = effective_variance(a, p)?;
    let centering: f64 = mean_correction.iter().map(|v| v.as_f64().powi(2)).sum();
    Ok(VarianceReport { effective, centering, pseudo: effective - centering })
}

/// Variance of the plain estimator `∇φ_i(w)/(n p_i)`: `V_c = ‖Σ ∇φ_i‖² / n²`.
pub fn pseudo_variance<S: Scalar>(
    spec: &ProblemSpec<S>,
    data: &Dataset<S>,
    w: &[S],
    p: &[S],
) -> Result<VarianceReport> {
    estimator_variance(&EstimatorState::PlainSgd, spec, data, w, p)
}

/// Variance of any estimator state at `w` under `p`.
pub fn estimator_variance<S: Scalar>(
    state: &EstimatorState<S>,
    spec: &ProblemSpec<S>,
    data: &Dataset<S>,
    w: &[S],
    p: &[S],
) -> Result<VarianceReport> {
    check_lengths(data.len(), p.len())?;
    let a = state.all_rewards(spec, data, w)?;
    let m = state.mean_correction(spec, data, w)?;
    variance_report(&a, p, &m)
}

/// A distribution together with a flag telling whether the input was degenerate
/// (all zero), in which case the uniform distribution is returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalDistribution {
    pub p: Vec<f64>,
    pub degenerate: bool,
}

/// `p_i ∝ mass_i` with zero entries lifted to [`OPTIMAL_FLOOR`].
pub fn proportional(mass: &[f64]) -> OptimalDistribution {
    let n = mass.len();
    if !mass.iter().any(|m| *m > 0.0) {
        return OptimalDistribution { p: vec![1.0 / n as f64; n], degenerate: true };
    }
    let lifted: Vec<f64> = mass.iter().map(|m| if *m > 0.0 { *m } else { OPTIMAL_FLOOR }).collect();
    let sum: f64 = lifted.iter().sum();
    OptimalDistribution { p: lifted.iter().map(|m| m / sum).collect(), degenerate: false }
}

/// `p_i ∝ ‖∇φ_i(w)‖`, the per-step minimizer of the plain estimator's variance.
pub fn optimal_stepwise_p<S: Scalar>(spec: &ProblemSpec<S>, data: &Dataset<S>, w: &[S]) -> Result<OptimalDistribution> {
    let coefs = spec.all_coefficients(data, w)?;
    let norms: Vec<f64> = data
        .points()
        .iter()
        .zip(&coefs)
        .map(|(pt, c)| c.as_f64().abs() * pt.features.norm_sq().as_f64().sqrt())
        .collect();
    Ok(proportional(&norms))
}

/// `p*_i ∝ √(Σ_t a_i^t)`, the best fixed distribution in hindsight.
pub fn optimal_static_p<S: Scalar>(history: &[Vec<S>]) -> Result<OptimalDistribution> {
    let totals = cumulative(history)?;
    Ok(proportional(&totals.iter().map(|v| v.sqrt()).collect::<Vec<_>>()))
}

fn cumulative<S: Scalar>(history: &[Vec<S>]) -> Result<Vec<f64>> {
    let n = history.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::config("reward history is empty"));
    }
    let mut totals = vec![0.0; n];
    for a in history {
        check_lengths(n, a.len())?;
        for (tot, v) in totals.iter_mut().zip(a) {
            *tot += v.as_f64();
        }
    }
    Ok(totals)
}

/// Outcome of comparing cumulated effective variance against the regret bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `Σ_t V_e^t(p^t)`
    pub lhs: f64,
    /// `Σ_t V_e^t(p*)`
    pub oracle: f64,
    /// `constant · √(n⁵ T mean(a²) ln n)`
    pub additive: f64,
    pub satisfied: bool,
    /// Whether `T` meets the horizon condition for the given bounds.
    pub precondition_met: bool,
    /// Smallest horizon meeting the condition.
    pub required_horizon: u64,
    /// Whether every observed `a_i^t` stayed below its bound.
    pub rewards_within_bounds: bool,
}

/// Checks `Σ_t V_e^t(p^t) ≤ 3 Σ_t V_e^t(p*) + constant · √(n⁵ T mean(a²) ln n)`.
///
/// `rewards[t]` and `probabilities[t]` are the full vectors `a^t` and `p^t`;
/// `bounds` are the per-point bounds the sampler was configured with.
pub fn regret_bound_check<S: Scalar>(
    rewards: &[Vec<S>],
    probabilities: &[Vec<S>],
    bounds: &[S],
    constant: f64,
) -> Result<BoundReport> {
    if rewards.len() != probabilities.len() {
        return Err(Error::config(format!(
            "{} reward vectors but {} probability vectors",
            rewards.len(),
            probabilities.len()
        )));
    }
    let n = bounds.len();
    let horizon = rewards.len();
    let mut lhs = 0.0;
    let mut within = true;
    for (a, p) in rewards.iter().zip(probabilities) {
        check_lengths(n, a.len())?;
        lhs += effective_variance(a, p)?;
        within &= a.iter().zip(bounds).all(|(v, b)| v.as_f64() <= b.as_f64() * (1.0 + 1e-12));
    }
    let oracle = if horizon == 0 {
        0.0
    } else {
        let totals = cumulative(rewards)?;
        let root_sum: f64 = totals.iter().map(|v| v.sqrt()).sum();
        root_sum * root_sum
    };
    let nf = n as f64;
    let a_sq_mean = bounds.iter().map(|v| v.as_f64().powi(2)).sum::<f64>() / nf;
    let additive = constant * (nf.powi(5) * horizon as f64 * a_sq_mean * nf.ln()).sqrt();
    let required_horizon = mabs_t_condition(n, bounds, S::one())?;
    Ok(BoundReport {
        lhs,
        oracle,
        additive,
        satisfied: lhs <= 3.0 * oracle + additive + CHECK_TOLERANCE,
        precondition_met: horizon as u64 >= required_horizon,
        required_horizon,
        rewards_within_bounds: within,
    })
}

/// Both sides of the mixing inequality for the effective variance
/// `(1-2ζ) V(p1) - (1-ζ) V(p2) ≤ ⟨p1 - p2, ∇V(p1)⟩ + ζ ⟨p2, ∇V(p1)⟩`.
pub fn lemma1_sides(a: &[f64], p1: &[f64], p2: &[f64], zeta: f64) -> Result<(f64, f64)> {
    check_lengths(a.len(), p1.len())?;
    check_lengths(a.len(), p2.len())?;
    let v1 = effective_variance(a, p1)?;
    let v2 = effective_variance(a, p2)?;
    let grad = effective_variance_gradient(a, p1);
    let diff: f64 = p1.iter().zip(p2).zip(&grad).map(|((x, y), g)| (x - y) * g).sum();
    let along: f64 = p2.iter().zip(&grad).map(|(y, g)| y * g).sum();
    Ok(((1.0 - 2.0 * zeta) * v1 - (1.0 - zeta) * v2, diff + zeta * along))
}

/// Evaluates the mixing inequality of [`lemma1_sides`] with tolerance [`CHECK_TOLERANCE`]; requires `ζ ≤ 1`.
pub fn lemma1_check(a: &[f64], p1: &[f64], p2: &[f64], zeta: f64) -> Result<bool> {
    if !(zeta <= 1.0) {
        return Err(Error::config(format!("zeta must be at most 1, got {zeta}")));
    }
    let (lhs, rhs) = lemma1_sides(a, p1, p2, zeta)?;
    Ok(lhs <= rhs + CHECK_TOLERANCE)
}

/// Mean and sample standard deviation (`n - 1` denominator, zero for one value).
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn check_lengths(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
