//! Linear-regression datasets with one point stretched to control `τ`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, ProblemSpec};
use crate::scalar::Scalar;

/// Floor added to the per-feature standard deviation.
pub const FEATURE_STD_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n: usize,
    pub d: usize,
    pub beta_std: f64,
    pub noise_std: f64,
    /// Factor applied to the features of the point with the largest norm.
    pub scale_c: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig { n: 101, d: 5, beta_std: 10.0, noise_std: 1.0, scale_c: 1.0, seed: 0 }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config(format!("synthetic n must be at least 2, got {}", self.n)));
        }
        if self.d < 1 {
            return Err(Error::config("synthetic d must be at least 1"));
        }
        if !(self.scale_c >= 1.0) || !self.scale_c.is_finite() {
            return Err(Error::config(format!("scale_c must be a finite number >= 1, got {}", self.scale_c)));
        }
        if !(self.beta_std >= 0.0 && self.noise_std >= 0.0) {
            return Err(Error::config("beta_std and noise_std must be nonnegative"));
        }
        Ok(())
    }
}

/// Draws the dataset described by `cfg`.
///
/// Per-feature means are `N(0, 1)` and standard deviations `|N(0, 1)| + 0.1`;
/// `y_i = ⟨x_i, β⟩ + N(0, noise_std²)` with `β ~ N(0, beta_std²)`. The point with
/// the largest `‖x_i‖²` then has its features multiplied by `scale_c`, labels untouched.
pub fn generate_synthetic<S: Scalar>(cfg: &SyntheticConfig) -> Result<Dataset<S>> {
    cfg.validate()?;
    let (rows, labels) = draw_rows(cfg);
    let rows = stretch(rows, cfg.scale_c);
    let rows: Vec<Vec<S>> = rows.iter().map(|r| r.iter().map(|v| S::of(*v)).collect()).collect();
    let labels: Vec<S> = labels.iter().map(|v| S::of(*v)).collect();
    Dataset::from_dense(&rows, &labels)
}

fn draw_rows(cfg: &SyntheticConfig) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let beta: Vec<f64> = (0..cfg.d).map(|_| cfg.beta_std * normal()).collect();
    let means: Vec<f64> = (0..cfg.d).map(|_| normal()).collect();
    let stds: Vec<f64> = (0..cfg.d).map(|_| normal().abs() + FEATURE_STD_FLOOR).collect();
    let mut rows = Vec::with_capacity(cfg.n);
    let mut labels = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let x: Vec<f64> = (0..cfg.d).map(|j| means[j] + stds[j] * normal()).collect();
        let y = x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + cfg.noise_std * normal();
        rows.push(x);
        labels.push(y);
    }
    (rows, labels)
}

fn largest_row(rows: &[Vec<f64>]) -> usize {
    let norms: Vec<f64> = rows.iter().map(|r| r.iter().map(|v| v * v).sum()).collect();
    (0..rows.len()).fold(0, |best, i| if norms[i] > norms[best] { i } else { best })
}

fn stretch(mut rows: Vec<Vec<f64>>, c: f64) -> Vec<Vec<f64>> {
    if c != 1.0 {
        let k = largest_row(&rows);
        rows[k].iter_mut().for_each(|v| *v *= c);
    }
    rows
}

/// `τ = max L_i / mean L_i` of the dataset generated with `scale_c = c`.
pub fn tau_of_scale<S: Scalar>(cfg: &SyntheticConfig, spec: &ProblemSpec<S>, c: f64) -> Result<f64> {
    let data = generate_synthetic::<S>(&SyntheticConfig { scale_c: c, ..*cfg })?;
    Ok(spec.smoothness_profile(&data).tau.as_f64())
}

/// Finds `scale_c` giving `τ` within `tol` (relative) of `target` by bisection.
///
/// Targets at or below the unscaled `τ` give `scale_c = 1`. Only the largest
/// point moves, so `τ` stays below `n`.
pub fn scale_for_tau<S: Scalar>(cfg: &SyntheticConfig, spec: &ProblemSpec<S>, target: f64, tol: f64) -> Result<f64> {
    cfg.validate()?;
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::config(format!("target tau must be positive, got {target}")));
    }
    if target >= cfg.n as f64 {
        return Err(Error::config(format!(
            "target tau {target} is unreachable by stretching one point of {} (limit n)",
            cfg.n
        )));
    }
    if tau_of_scale(cfg, spec, 1.0)? >= target {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    while tau_of_scale(cfg, spec, hi)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::config(format!("target tau {target} not reached by stretching")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let tau = tau_of_scale(cfg, spec, mid)?;
        if (tau - target).abs() <= tol * target {
            return Ok(mid);
        }
        if tau < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Loss, Regularizer};

    fn ridge() -> ProblemSpec<f64> {
        ProblemSpec::new(Loss::Ridge, Regularizer::None, 0.0).unwrap()
    }

    #[test]
    fn unit_scale_leaves_points_alone() {
        let cfg = SyntheticConfig { seed: 4, ..Default::default() };
        let (rows, labels) = draw_rows(&cfg);
        let d: Dataset = generate_synthetic(&cfg).unwrap();
        let back: Dataset = Dataset::from_dense(&rows, &labels).unwrap();
        assert_eq!(d, back);
        assert_eq!((d.len(), d.dim()), (101, 5));
    }

    #[test]
    fn scaling_multiplies_smoothness_by_c_squared() {
        let base = SyntheticConfig { seed: 7, ..Default::default() };
        let a: Dataset = generate_synthetic(&base).unwrap();
        let b: Dataset = generate_synthetic(&SyntheticConfig { scale_c: 10.0, ..base }).unwrap();
        let la = ridge().smoothness_profile(&a);
        let lb = ridge().smoothness_profile(&b);
        let k = (0..a.len()).fold(0, |m, i| if la.per_point[i] > la.per_point[m] { i } else { m });
        assert!((lb.per_point[k] / la.per_point[k] - 100.0).abs() < 1e-9);
        for i in (0..a.len()).filter(|&i| i != k) {
            assert_eq!(a.point(i), b.point(i));
        }
        assert_eq!(a.point(k).label, b.point(k).label);
        assert!(lb.tau > la.tau);
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = SyntheticConfig { seed: 11, scale_c: 3.0, ..Default::default() };
        assert_eq!(generate_synthetic::<f64>(&cfg).unwrap(), generate_synthetic::<f64>(&cfg).unwrap());
        assert_ne!(
            generate_synthetic::<f64>(&cfg).unwrap(),
            generate_synthetic::<f64>(&SyntheticConfig { seed: 12, ..cfg }).unwrap()
        );
    }

    #[test]
    fn bisection_hits_tau_targets() {
        let cfg = SyntheticConfig { seed: 2, ..Default::default() };
        let mut last = 0.0;
        for target in [5.0, 20.0, 40.0, 80.0] {
            let c = scale_for_tau(&cfg, &ridge(), target, 1e-6).unwrap();
            let tau = tau_of_scale(&cfg, &ridge(), c).unwrap();
            assert!((tau - target).abs() <= 1e-6 * target);
            assert!(c > last);
            last = c;
        }
        assert!(scale_for_tau(&cfg, &ridge(), 101.0, 1e-6).is_err());
        assert_eq!(scale_for_tau(&cfg, &ridge(), 1.0, 1e-6).unwrap(), 1.0);
    }

    #[test]
    fn rejects_invalid_configs() {
        for cfg in [
            SyntheticConfig { n: 1, ..Default::default() },
            SyntheticConfig { d: 0, ..Default::default() },
            SyntheticConfig { scale_c: 0.5, ..Default::default() },
        ] {
            assert!(generate_synthetic::<f64>(&cfg).is_err());
        }
    }
}
