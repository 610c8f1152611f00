use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Step size `γ_t` as a function of the 1-based iteration `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepSchedule<S = f64> {
    Constant {
        gamma: S,
    },
    /// `γ_t = 2 / (μ t)`
    InverseStrong {
        mu: S,
    },
    /// `γ_t = 1 / (α + μ t)`
    Shifted {
        alpha: S,
        mu: S,
    },
}

impl<S: Scalar> StepSchedule<S> {
    pub fn constant(gamma: S) -> Self {
        StepSchedule::Constant { gamma }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::Constant { gamma } => gamma > S::zero() && gamma.is_finite(),
            StepSchedule::InverseStrong { mu } => mu > S::zero() && mu.is_finite(),
            StepSchedule::Shifted { alpha, mu } => {
                alpha >= S::zero() && mu >= S::zero() && alpha + mu > S::zero() && (alpha + mu).is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("step schedule {self:?} does not give positive finite steps")))
        }
    }

    pub fn step(&self, t: usize) -> S {
        debug_assert!(t >= 1);
        let t = S::of_usize(t);
        match *self {
            StepSchedule::Constant { gamma } => gamma,
            StepSchedule::InverseStrong { mu } => S::of(2.0) / (mu * t),
            StepSchedule::Shifted { alpha, mu } => S::one() / (alpha + mu * t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        assert_eq!(StepSchedule::constant(0.3).step(17), 0.3);
        assert_eq!(StepSchedule::InverseStrong { mu: 0.5 }.step(4), 1.0);
        assert_eq!(StepSchedule::Shifted { alpha: 2.0, mu: 1.0 }.step(2), 0.25);
        assert!(StepSchedule::constant(0.0f64).validate().is_err());
        assert!(StepSchedule::InverseStrong { mu: -1.0f64 }.validate().is_err());
        assert!(StepSchedule::Shifted { alpha: 0.0f64, mu: 0.0 }.validate().is_err());
        assert!(StepSchedule::Shifted { alpha: 1.0f64, mu: 0.1 }.validate().is_ok());
    }
}
