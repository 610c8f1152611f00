//! Unbiased gradient estimators and their reward bases `a_i^t`.
//!
//! Each estimator has the form `ĝ = c_i x_i / (n p_i) + m`, where `c_i x_i` is
//! the per-point correction and `m` the anchor mean:
//!
//! | estimator | correction `c_i x_i`           | anchor `m`             |
//! |-----------|--------------------------------|------------------------|
//! | plain SGD | `∇φ_i(w)`                      | `0`                    |
//! | Prox-SVRG | `∇φ_i(w) - ∇φ_i(w̃)`            | `∇f(w̃)`                |
//! | SAGA      | `∇φ_i(w) - ∇φ_i(w̃_i)`          | mean of the table      |
//!
//! and `a_i^t = ‖c_i x_i‖² / n²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, ProblemSpec};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    PlainSgd,
    ProxSvrg,
    Saga,
}

/// Prox-SVRG anchor: snapshot `w̃`, its full gradient and the running bin average.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxSvrgState<S = f64> {
    pub snapshot: Vec<S>,
    /// Gradient coefficients of every point at the snapshot.
    pub snapshot_coefficients: Vec<S>,
    /// `∇f(w̃)`
    pub snapshot_full_gradient: Vec<S>,
    /// Sum of the iterates seen in the current bin.
    pub bin_accumulator: Vec<f64>,
    pub bin_size: usize,
    pub filled: usize,
}

impl<S: Scalar> ProxSvrgState<S> {
    /// Takes `w` itself as the first snapshot, with one full gradient pass.
    pub fn new(spec: &ProblemSpec<S>, data: &Dataset<S>, w: &[S]) -> Result<Self> {
        let mut state = ProxSvrgState {
            snapshot: w.to_vec(),
            snapshot_coefficients: Vec::new(),
            snapshot_full_gradient: Vec::new(),
            bin_accumulator: vec![0.0; data.dim()],
            bin_size: data.len(),
            filled: 0,
        };
        state.refresh_snapshot(spec, data)?;
        Ok(state)
    }

    fn refresh_snapshot(&mut self, spec: &ProblemSpec<S>, data: &Dataset<S>) -> Result<()> {
        self.snapshot_coefficients = spec.all_coefficients(data, &self.snapshot)?;
        self.snapshot_full_gradient = mean_of_coefficients(data, &self.snapshot_coefficients);
        Ok(())
    }

    /// Adds the iterate used at this step to the bin; at the bin boundary the
    /// snapshot becomes the bin average and its full gradient is recomputed.
    pub fn record_iterate(&mut self, spec: &ProblemSpec<S>, data: &Dataset<S>, w: &[S]) -> Result<bool> {
        for (acc, v) in self.bin_accumulator.iter_mut().zip(w) {
            *acc += v.as_f64();
        }
        self.filled += 1;
        if self.filled == self.bin_size {
            self.epoch_update(spec, data)?;
            return Ok(true);
        }
        Ok(false)
    }

    /// `w̃ ← bin average`, followed by an exact full-gradient pass.
    pub fn epoch_update(&mut self, spec: &ProblemSpec<S>, data: &Dataset<S>) -> Result<()> {
        if self.filled != self.bin_size {
            return Err(Error::contract(format!(
                "snapshot refresh requested after {} of {} bin iterations",
                self.filled, self.bin_size
            )));
        }
        let count = self.filled as f64;
        self.snapshot = self.bin_accumulator.iter().map(|v| S::of(v / count)).collect();
        self.bin_accumulator.iter_mut().for_each(|v| *v = 0.0);
        self.filled = 0;
        self.refresh_snapshot(spec, data)
    }
}

/// SAGA gradient table, stored as one gradient coefficient per point.
#[derive(Debug, Clone, PartialEq)]
pub struct SagaState<S = f64> {
    /// `∇φ_i(w̃_i) = coefficients[i] · x_i`
    pub coefficients: Vec<S>,
    pub table_mean: Vec<S>,
    updates_since_resync: usize,
}

impl<S: Scalar> SagaState<S> {
    /// Fills the table with one full pass at `w`.
    pub fn new(spec: &ProblemSpec<S>, data: &Dataset<S>, w: &[S]) -> Result<Self> {
        let coefficients = spec.all_coefficients(data, w)?;
        let table_mean = mean_of_coefficients(data, &coefficients);
        Ok(SagaState { coefficients, table_mean, updates_since_resync: 0 })
    }

    /// Replaces entry `i` and adjusts the mean in O(nnz(x_i)).
    ///
    /// The mean is recomputed from scratch every `n` replacements to bound drift.
    pub fn replace(&mut self, data: &Dataset<S>, i: usize, coefficient: S) {
        let old = self.coefficients[i];
        self.coefficients[i] = coefficient;
        let n = S::of_usize(data.len());
        data.point(i).features.axpy_into((coefficient - old) / n, &mut self.table_mean);
        self.updates_since_resync += 1;
        if self.updates_since_resync >= data.len() {
            self.table_mean = mean_of_coefficients(data, &self.coefficients);
            self.updates_since_resync = 0;
        }
    }

    /// Brute-force mean of the table, O(nnz).
    pub fn exact_mean(&self, data: &Dataset<S>) -> Vec<S> {
        mean_of_coefficients(data, &self.coefficients)
    }
}

/// Estimator-specific state carried across iterations.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorState<S = f64> {
    PlainSgd,
    ProxSvrg(ProxSvrgState<S>),
    Saga(SagaState<S>),
}

/// One realization of the estimator at the drawn index.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate<S = f64> {
    pub g_hat: Vec<S>,
    /// `a_i^t`
    pub reward: S,
    /// Gradient coefficient of the drawn point at the current iterate.
    pub coefficient: S,
}

impl<S: Scalar> EstimatorState<S> {
    pub fn new(kind: EstimatorKind, spec: &ProblemSpec<S>, data: &Dataset<S>, w: &[S]) -> Result<Self> {
        Ok(match kind {
            EstimatorKind::PlainSgd => EstimatorState::PlainSgd,
            EstimatorKind::ProxSvrg => EstimatorState::ProxSvrg(ProxSvrgState::new(spec, data, w)?),
            EstimatorKind::Saga => EstimatorState::Saga(SagaState::new(spec, data, w)?),
        })
    }

    pub fn kind(&self) -> EstimatorKind {
        match self {
            EstimatorState::PlainSgd => EstimatorKind::PlainSgd,
            EstimatorState::ProxSvrg(_) => EstimatorKind::ProxSvrg,
            EstimatorState::Saga(_) => EstimatorKind::Saga,
        }
    }

    /// Anchor coefficient of point `i` (zero for plain SGD).
    pub fn anchor_coefficient(&self, i: usize) -> S {
        match self {
            EstimatorState::PlainSgd => S::zero(),
            EstimatorState::ProxSvrg(s) => s.snapshot_coefficients[i],
            EstimatorState::Saga(s) => s.coefficients[i],
        }
    }

    /// Anchor mean `m`, or `None` for plain SGD.
    pub fn anchor_mean(&self) -> Option<&[S]> {
        match self {
            EstimatorState::PlainSgd => None,
            EstimatorState::ProxSvrg(s) => Some(&s.snapshot_full_gradient),
            EstimatorState::Saga(s) => Some(&s.table_mean),
        }
    }

    /// Computes `ĝ` and `a_i^t` for the drawn index `i` with draw probability `p_i`.
    pub fn estimate(
        &self,
        spec: &ProblemSpec<S>,
        data: &Dataset<S>,
        w: &[S],
        i: usize,
        p_i: S,
    ) -> Result<GradientEstimate<S>> {
        let mut g_hat = vec![S::zero(); data.dim()];
        let (reward, coefficient) = self.estimate_into(spec, data, w, i, p_i, &mut g_hat)?;
        Ok(GradientEstimate { g_hat, reward, coefficient })
    }

    /// Allocation-free form of [`estimate`](Self::estimate); overwrites `g_hat`.
    pub fn estimate_into(
        &self,
        spec: &ProblemSpec<S>,
        data: &Dataset<S>,
        w: &[S],
        i: usize,
        p_i: S,
        g_hat: &mut [S],
    ) -> Result<(S, S)> {
        if !(p_i > S::zero()) {
            return Err(Error::contract(format!("draw probability must be positive, got {p_i}")));
        }
        data.check_dim(w)?;
        let point = data.point(i);
        let coefficient = spec.gradient_coefficient(point, w)?;
        let correction = coefficient - self.anchor_coefficient(i);
        match self.anchor_mean() {
            Some(m) => g_hat.copy_from_slice(m),
            None => g_hat.iter_mut().for_each(|v| *v = S::zero()),
        }
        let n = S::of_usize(data.len());
        point.features.axpy_into(correction / (n * p_i), g_hat);
        let reward = correction * correction * point.features.norm_sq() / (n * n);
        Ok((reward, coefficient))
    }

    /// Reward bases `a_i^t` of every point at `w`. O(nnz).
    pub fn all_rewards(&self, spec: &ProblemSpec<S>, data: &Dataset<S>, w: &[S]) -> Result<Vec<S>> {
        let coefs = spec.all_coefficients(data, w)?;
        let n2 = S::of_usize(data.len()).powi(2);
        Ok(coefs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let corr = c - self.anchor_coefficient(i);
                corr * corr * data.point(i).features.norm_sq() / n2
            })
            .collect())
    }

    /// Mean correction `(1/n) Σ c_i x_i` at `w`; its squared norm is the centering term.
    pub fn mean_correction(&self, spec: &ProblemSpec<S>, data: &Dataset<S>, w: &[S]) -> Result<Vec<S>> {
        let coefs = spec.all_coefficients(data, w)?;
        let corr: Vec<S> = coefs.iter().enumerate().map(|(i, &c)| c - self.anchor_coefficient(i)).collect();
        Ok(mean_of_coefficients(data, &corr))
    }

    /// Bookkeeping after the optimizer step. `w_before` is the iterate the
    /// estimate was computed at and `coefficient` the drawn point's coefficient there.
    pub fn after_step(
        &mut self,
        spec: &ProblemSpec<S>,
        data: &Dataset<S>,
        i: usize,
        w_before: &[S],
        coefficient: S,
    ) -> Result<()> {
        match self {
            EstimatorState::PlainSgd => Ok(()),
            EstimatorState::ProxSvrg(s) => s.record_iterate(spec, data, w_before).map(|_| ()),
            EstimatorState::Saga(s) => {
                s.replace(data, i, coefficient);
                Ok(())
            }
        }
    }
}

/// `(1/n) Σ coefs[i] · x_i`, accumulated in `f64`.
pub(crate) fn mean_of_coefficients<S: Scalar>(data: &Dataset<S>, coefs: &[S]) -> Vec<S> {
    let mut acc = vec![0.0f64; data.dim()];
    for (p, c) in data.points().iter().zip(coefs) {
        let c = c.as_f64();
        if c != 0.0 {
            for (j, v) in p.features.iter() {
                acc[j] += c * v.as_f64();
            }
        }
    }
    let n = data.len() as f64;
    acc.into_iter().map(|v| S::of(v / n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Loss, Regularizer};

    fn instance() -> (ProblemSpec<f64>, Dataset<f64>) {
        let spec = ProblemSpec::new(Loss::Ridge, Regularizer::None, 0.0).unwrap();
        let data = Dataset::from_dense(&[vec![1.0, 2.0], vec![-0.5, 1.0], vec![3.0, 0.0]], &[1.0, -1.0, 2.0]).unwrap();
        (spec, data)
    }

    #[test]
    fn plain_uniform_is_classic_sgd() {
        let (spec, data) = instance();
        let w = [0.2, -0.1];
        let est = EstimatorState::PlainSgd.estimate(&spec, &data, &w, 1, 1.0 / 3.0).unwrap();
        let g = spec.sub_gradient(data.point(1), &w).unwrap().to_dense(2);
        for (a, b) in est.g_hat.iter().zip(&g) {
            assert!((a - b).abs() < 1e-15);
        }
        let gn: f64 = g.iter().map(|v| v * v).sum();
        assert!((est.reward - gn / 9.0).abs() < 1e-15);
    }

    #[test]
    fn saga_with_fresh_table_entry_returns_table_mean() {
        let (spec, data) = instance();
        let w = [0.4, 0.3];
        let state = EstimatorState::Saga(SagaState::new(&spec, &data, &w).unwrap());
        let est = state.estimate(&spec, &data, &w, 2, 0.2).unwrap();
        assert_eq!(est.reward, 0.0);
        assert_eq!(est.g_hat, spec.full_gradient(&data, &w).unwrap());
    }

    #[test]
    fn rejects_nonpositive_probability() {
        let (spec, data) = instance();
        assert!(EstimatorState::PlainSgd.estimate(&spec, &data, &[0.0, 0.0], 0, 0.0).is_err());
    }

    #[test]
    fn svrg_epoch_update_averages_bin() {
        let (spec, data) = instance();
        let mut s = ProxSvrgState::new(&spec, &data, &[0.0, 0.0]).unwrap();
        assert!(s.epoch_update(&spec, &data).is_err());
        assert!(!s.record_iterate(&spec, &data, &[1.0, 1.0]).unwrap());
        assert!(!s.record_iterate(&spec, &data, &[1.0, 1.0]).unwrap());
        assert!(s.record_iterate(&spec, &data, &[1.0, 1.0]).unwrap());
        assert_eq!(s.snapshot, vec![1.0, 1.0]);
        let exact = spec.full_gradient(&data, &s.snapshot).unwrap();
        for (a, b) in s.snapshot_full_gradient.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn saga_table_mean_tracks_brute_force() {
        let (spec, data) = instance();
        let mut s = SagaState::new(&spec, &data, &[0.0, 0.0]).unwrap();
        let w_seq = [[0.1, 0.2], [0.5, -0.3], [1.0, 1.0], [-2.0, 0.4], [0.0, 0.7]];
        for (k, w) in w_seq.iter().enumerate() {
            let i = (k * 2) % 3;
            let c = spec.gradient_coefficient(data.point(i), w).unwrap();
            s.replace(&data, i, c);
            let brute = s.exact_mean(&data);
            for (a, b) in s.table_mean.iter().zip(&brute) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
