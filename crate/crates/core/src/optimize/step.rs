use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemSpec;
use crate::optimize::{EstimatorKind, StepSchedule};
use crate::scalar::Scalar;

/// Optimizer: estimator plus update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Plain estimator, regularizer applied through its subgradient.
    Sgd,
    /// Plain estimator, regularizer applied through its prox.
    ProxSgd,
    ProxSvrg,
    Saga,
}

impl Method {
    pub fn estimator(self) -> EstimatorKind {
        match self {
            Method::Sgd | Method::ProxSgd => EstimatorKind::PlainSgd,
            Method::ProxSvrg => EstimatorKind::ProxSvrg,
            Method::Saga => EstimatorKind::Saga,
        }
    }

    pub fn is_proximal(self) -> bool {
        !matches!(self, Method::Sgd)
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Sgd => "sgd",
            Method::ProxSgd => "prox-sgd",
            Method::ProxSvrg => "prox-svrg",
            Method::Saga => "saga",
        }
    }

    /// Prefix used in experiment tables (`SGD_MABS`, `SAGA_U`, ...).
    pub fn table_name(self) -> &'static str {
        match self {
            Method::Sgd => "SGD",
            Method::ProxSgd => "PSGD",
            Method::ProxSvrg => "PROXSVRG",
            Method::Saga => "SAGA",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Method::Sgd),
            "prox-sgd" => Ok(Method::ProxSgd),
            "prox-svrg" => Ok(Method::ProxSvrg),
            "saga" => Ok(Method::Saga),
            other => Err(Error::config(format!("unknown estimator '{other}'"))),
        }
    }
}

/// Current iterate `w^t` and the 1-based index `t` of the next iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdState<S = f64> {
    pub w: Vec<S>,
    pub t: usize,
}

impl<S: Scalar> SgdState<S> {
    pub fn new(w: Vec<S>) -> Self {
        SgdState { w, t: 1 }
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|v| v.is_finite())
    }
}

/// `w ← w - γ_t (ĝ + λ ∇r(w))`
pub fn sgd_step<S: Scalar>(
    state: &mut SgdState<S>,
    g_hat: &[S],
    schedule: &StepSchedule<S>,
    spec: &ProblemSpec<S>,
) -> Result<()> {
    check_step(state, g_hat)?;
    let gamma = schedule.step(state.t);
    let reg = spec.reg_subgradient(&state.w);
    for ((w, g), r) in state.w.iter_mut().zip(g_hat).zip(reg) {
        *w = *w - gamma * (*g + spec.lambda * r);
    }
    state.t += 1;
    Ok(())
}

/// `w ← prox_{γ_t λ r}(w - γ_t ĝ)`
pub fn prox_sgd_step<S: Scalar>(
    state: &mut SgdState<S>,
    g_hat: &[S],
    schedule: &StepSchedule<S>,
    spec: &ProblemSpec<S>,
) -> Result<()> {
    check_step(state, g_hat)?;
    let gamma = schedule.step(state.t);
    for (w, g) in state.w.iter_mut().zip(g_hat) {
        *w = *w - gamma * *g;
    }
    spec.prox_in_place(&mut state.w, gamma)?;
    state.t += 1;
    Ok(())
}

/// Applies the update rule of `method`.
pub fn apply_step<S: Scalar>(
    method: Method,
    state: &mut SgdState<S>,
    g_hat: &[S],
    schedule: &StepSchedule<S>,
    spec: &ProblemSpec<S>,
) -> Result<()> {
    if method.is_proximal() {
        prox_sgd_step(state, g_hat, schedule, spec)
    } else {
        sgd_step(state, g_hat, schedule, spec)
    }
}

fn check_step<S: Scalar>(state: &SgdState<S>, g_hat: &[S]) -> Result<()> {
    if state.t == 0 {
        return Err(Error::contract("iteration counter starts at 1"));
    }
    if g_hat.len() != state.w.len() {
        return Err(Error::DimensionMismatch { expected: state.w.len(), found: g_hat.len() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Loss, Regularizer};

    fn spec(reg: Regularizer, lambda: f64) -> ProblemSpec<f64> {
        ProblemSpec::new(Loss::Ridge, reg, lambda).unwrap()
    }

    #[test]
    fn sgd_examples() {
        let sched = StepSchedule::constant(0.1);
        let mut s = SgdState::new(vec![0.7, -0.2]);
        sgd_step(&mut s, &[0.0, 0.0], &sched, &spec(Regularizer::None, 0.0)).unwrap();
        assert_eq!(s.w, vec![0.7, -0.2]);
        assert_eq!(s.t, 2);

        let mut s = SgdState::new(vec![0.0]);
        sgd_step(&mut s, &[2.0], &sched, &spec(Regularizer::None, 0.0)).unwrap();
        assert!((s.w[0] + 0.2).abs() < 1e-15);

        let mut s = SgdState::new(vec![1.0, -2.0]);
        sgd_step(&mut s, &[0.0, 0.0], &sched, &spec(Regularizer::L2, 0.5)).unwrap();
        assert!((s.w[0] - 0.95).abs() < 1e-15 && (s.w[1] + 1.9).abs() < 1e-15);
    }

    #[test]
    fn prox_examples() {
        let sched = StepSchedule::constant(0.5);
        let mut s = SgdState::new(vec![0.3, 2.0]);
        prox_sgd_step(&mut s, &[0.0, 0.0], &sched, &spec(Regularizer::L1, 1.0)).unwrap();
        assert_eq!(s.w[0], 0.0);
        assert_eq!(s.w[1], 1.5);

        for reg in [Regularizer::L1, Regularizer::L2, Regularizer::None] {
            let mut a = SgdState::new(vec![0.31, -1.7, 0.0]);
            let mut b = a.clone();
            let g = [0.123, -4.5, 1e-3];
            sgd_step(&mut a, &g, &sched, &spec(reg, 0.0)).unwrap();
            prox_sgd_step(&mut b, &g, &sched, &spec(reg, 0.0)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn prox_step_matches_grid_minimizer() {
        // d = 1, L1: minimize λ|u| + (u - (w - γ g))² / (2γ)
        let (w, g, gamma, lambda) = (0.8, 1.3, 0.2, 0.7);
        let mut s = SgdState::new(vec![w]);
        prox_sgd_step(&mut s, &[g], &StepSchedule::constant(gamma), &spec(Regularizer::L1, lambda)).unwrap();
        let v = w - gamma * g;
        let obj = |u: f64| lambda * u.abs() + (u - v).powi(2) / (2.0 * gamma);
        let best = (0..=400_000).map(|k| -2.0 + k as f64 * 1e-5).fold(f64::NAN, |b, u| {
            if b.is_nan() || obj(u) < obj(b) {
                u
            } else {
                b
            }
        });
        assert!((s.w[0] - best).abs() < 1e-6);
    }

    #[test]
    fn step_rejects_bad_shapes() {
        let mut s = SgdState::new(vec![0.0, 0.0]);
        assert!(sgd_step(&mut s, &[1.0], &StepSchedule::constant(0.1), &spec(Regularizer::None, 0.0)).is_err());
        s.t = 0;
        assert!(
            prox_sgd_step(&mut s, &[1.0, 1.0], &StepSchedule::constant(0.1), &spec(Regularizer::None, 0.0)).is_err()
        );
    }
}
