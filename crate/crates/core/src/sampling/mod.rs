//! Datapoint samplers: uniform, fixed importance sampling, MABS and MABS2.
//!
//! Every sampler hands back the probability of the index it drew, since the
//! unbiased gradient estimators divide by `n p_i`.

mod importance;
mod mabs;
mod tree;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use importance::{IsState, IS_FLOOR};
pub use mabs::{
    mabs2_delta, mabs_delta, mabs_t_condition, mean_square, Floor, Mabs2State, MabsParams, MabsState, BOUND_FLOOR,
    DEFAULT_ETA,
};
pub use tree::WeightTree;

/// Which sampling strategy to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Uniform,
    /// `p ∝ L_i`
    IsSmoothness,
    /// `p ∝ √a_i`
    IsBound,
    Mabs,
    Mabs2,
}

impl SamplerKind {
    pub fn label(self) -> &'static str {
        match self {
            SamplerKind::Uniform => "uniform",
            SamplerKind::IsSmoothness => "is-smoothness",
            SamplerKind::IsBound => "is-bound",
            SamplerKind::Mabs => "mabs",
            SamplerKind::Mabs2 => "mabs2",
        }
    }

    /// Short suffix used in experiment tables (`SGD_U`, `SGD_IS`, `SGD_MABS`).
    pub fn suffix(self) -> &'static str {
        match self {
            SamplerKind::Uniform => "U",
            SamplerKind::IsSmoothness | SamplerKind::IsBound => "IS",
            SamplerKind::Mabs => "MABS",
            SamplerKind::Mabs2 => "MABS2",
        }
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SamplerKind::Uniform),
            "is-smoothness" => Ok(SamplerKind::IsSmoothness),
            "is-bound" => Ok(SamplerKind::IsBound),
            "mabs" => Ok(SamplerKind::Mabs),
            "mabs2" => Ok(SamplerKind::Mabs2),
            other => Err(Error::config(format!("unknown sampler '{other}'"))),
        }
    }
}

/// A sampler over `n` datapoints.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampler<S = f64> {
    Uniform { n: usize },
    Importance(IsState<S>),
    Bandit(MabsState<S>),
}

impl<S: Scalar> Sampler<S> {
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("uniform sampler needs at least one point"));
        }
        Ok(Sampler::Uniform { n })
    }

    pub fn len(&self) -> usize {
        match self {
            Sampler::Uniform { n } => *n,
            Sampler::Importance(s) => s.len(),
            Sampler::Bandit(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Draws `i ~ p` and returns `(i, p_i)`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, S) {
        match self {
            Sampler::Uniform { n } => (rng.random_range(0..*n), S::one() / S::of_usize(*n)),
            Sampler::Importance(s) => s.draw(rng),
            Sampler::Bandit(s) => s.draw(rng),
        }
    }

    /// Feeds back the reward basis `a_i^t` observed for the drawn index.
    pub fn update(&mut self, i: usize, reward: S) -> Result<()> {
        match self {
            Sampler::Bandit(s) => s.update(i, reward),
            _ => {
                if i >= self.len() {
                    return Err(Error::contract(format!("index {i} out of range")));
                }
                if !(reward >= S::zero()) {
                    return Err(Error::contract(format!("reward basis must be nonnegative, got {reward}")));
                }
                Ok(())
            }
        }
    }

    pub fn probability(&self, i: usize) -> S {
        match self {
            Sampler::Uniform { n } => S::one() / S::of_usize(*n),
            Sampler::Importance(s) => s.probability(i),
            Sampler::Bandit(s) => s.probability(i),
        }
    }

    /// Snapshot of the full distribution. O(n).
    pub fn probabilities(&self) -> Vec<S> {
        match self {
            Sampler::Uniform { n } => vec![S::one() / S::of_usize(*n); *n],
            Sampler::Importance(s) => s.probabilities().to_vec(),
            Sampler::Bandit(s) => s.probabilities(),
        }
    }

    /// Leaf weights for reproducibility dumps; empty for non-adaptive samplers.
    pub fn weights(&self) -> &[S] {
        match self {
            Sampler::Bandit(s) => s.weights(),
            _ => &[],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn total_variation(counts: &[u64], p: &[f64]) -> f64 {
        let total: u64 = counts.iter().sum();
        0.5 * counts.iter().zip(p).map(|(c, q)| (*c as f64 / total as f64 - q).abs()).sum::<f64>()
    }

    #[test]
    fn fresh_mabs_draws_look_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = Sampler::Bandit(MabsState::<f64>::new(5, 100, 1.0, MabsParams::default()).unwrap());
        let mut counts = vec![0u64; 5];
        for _ in 0..1_000_000 {
            let (i, p) = s.draw(&mut rng);
            assert!(p >= 0.4 / 5.0);
            counts[i] += 1;
        }
        assert!(total_variation(&counts, &[0.2; 5]) < 5e-3);
    }

    #[test]
    fn importance_draw_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = Sampler::Importance(IsState::from_mass(&[0.9, 0.1]).unwrap());
        let mut counts = vec![0u64; 2];
        for _ in 0..1_000_000 {
            counts[s.draw(&mut rng).0] += 1;
        }
        assert!(total_variation(&counts, &[0.9, 0.1]) < 5e-3);
    }

    #[test]
    fn adapted_mabs_draws_follow_reported_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut state = MabsState::<f64>::new(4, 100, 1.0, MabsParams::default()).unwrap();
        state.set_delta(0.5).unwrap();
        state.update(2, 0.02).unwrap();
        state.update(0, 0.01).unwrap();
        let s = Sampler::Bandit(state);
        let p = s.probabilities();
        let mut counts = vec![0u64; 4];
        for _ in 0..1_000_000 {
            let (i, pi) = s.draw(&mut rng);
            assert_eq!(pi, p[i]);
            counts[i] += 1;
        }
        assert!(total_variation(&counts, &p) < 5e-3);
    }

    #[test]
    fn sampler_kind_round_trips_through_str() {
        for k in [
            SamplerKind::Uniform,
            SamplerKind::IsSmoothness,
            SamplerKind::IsBound,
            SamplerKind::Mabs,
            SamplerKind::Mabs2,
        ] {
            assert_eq!(k.label().parse::<SamplerKind>().unwrap(), k);
        }
        assert!("exp4".parse::<SamplerKind>().is_err());
    }
}
