//! EXP3-style bandit sampling over datapoints.
//!
//! The sampling distribution mixes the normalized bandit weights with a fixed
//! floor distribution: `p_i = (1 - η) w_i / W + η m_i`, where `m` is uniform
//! (MABS) or `q_i ∝ a_i^{2/5}` (MABS2). After drawing `i` with probability `p_i`
//! and observing the reward basis `a_i^t`, only the drawn weight changes:
//! `w_i ← w_i · exp(δ a_i^t / p_i³)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::sampling::WeightTree;
use crate::scalar::Scalar;

pub const DEFAULT_ETA: f64 = 0.4;

/// Zero bounds are lifted to this value before building the MABS2 floor.
pub const BOUND_FLOOR: f64 = 1e-12;

/// Leaf weights are rescaled once one of them would exceed this value.
const WEIGHT_LIMIT: f64 = 1e100;

/// Tunables shared by both bandit variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MabsParams<S = f64> {
    /// Mixing weight of the floor distribution, in `(0, 0.5)`.
    pub eta: S,
    /// Divides the theoretical `δ`; values `c > 1` shrink the horizon requirement by `c²`.
    pub delta_scale: S,
    /// Reset all weights to 1 every this many updates.
    pub reset_bin: Option<usize>,
}

impl<S: Scalar> Default for MabsParams<S> {
    fn default() -> Self {
        MabsParams { eta: S::of(DEFAULT_ETA), delta_scale: S::one(), reset_bin: None }
    }
}

impl<S: Scalar> MabsParams<S> {
    fn validate(&self) -> Result<()> {
        if !(self.eta > S::zero() && self.eta < S::of(0.5)) {
            return Err(Error::config(format!("eta must lie in (0, 0.5), got {}", self.eta)));
        }
        if !(self.delta_scale >= S::one()) || !self.delta_scale.is_finite() {
            return Err(Error::config(format!("delta scale c must be >= 1, got {}", self.delta_scale)));
        }
        if self.reset_bin == Some(0) {
            return Err(Error::config("reset bin size must be positive"));
        }
        Ok(())
    }
}

/// Floor distribution mixed into the bandit weights.
#[derive(Debug, Clone, PartialEq)]
pub enum Floor<S> {
    Uniform,
    /// Fixed `q` together with a tree for O(log n) draws from it.
    Weighted {
        q: Vec<S>,
        tree: WeightTree<S>,
    },
}

/// State of one MABS or MABS2 sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct MabsState<S = f64> {
    weights: WeightTree<S>,
    floor: Floor<S>,
    eta: S,
    delta: S,
    horizon: usize,
    t: usize,
    /// Natural log of the factor all weights were divided by to stay finite.
    log_rescale: f64,
    reset_bin: Option<usize>,
}

/// MABS2 shares its representation with MABS; only the floor differs.
pub type Mabs2State<S = f64> = MabsState<S>;

/// `δ = (1/c) √(η⁴ ln n / (T n⁵ mean(a²)))`
pub fn mabs_delta(n: usize, horizon: usize, a_sq_mean: f64, eta: f64, scale: f64) -> f64 {
    let n = n as f64;
    (eta.powi(4) * n.ln() / (horizon as f64 * n.powi(5) * a_sq_mean)).sqrt() / scale
}

/// `δ = (1/c) √(η⁴ ln n / (T n⁵ (mean a^{2/5})⁵))`
pub fn mabs2_delta(n: usize, horizon: usize, mean_a_two_fifths: f64, eta: f64, scale: f64) -> f64 {
    let n = n as f64;
    (eta.powi(4) * n.ln() / (horizon as f64 * n.powi(5) * mean_a_two_fifths.powi(5))).sqrt() / scale
}

/// Smallest horizon satisfying `T >= 25 n ln n max(a)² / (4 c² mean(a²))`.
pub fn mabs_t_condition<S: Scalar>(n: usize, a: &[S], c: S) -> Result<u64> {
    if a.iter().any(|v| !(*v >= S::zero())) || !a.iter().any(|v| *v > S::zero()) {
        return Err(Error::config("reward bounds must be nonnegative and not all zero"));
    }
    let max = a.iter().map(|v| v.as_f64()).fold(0.0, f64::max);
    let mean_sq = a.iter().map(|v| v.as_f64().powi(2)).sum::<f64>() / a.len() as f64;
    let c = c.as_f64();
    let nf = n as f64;
    Ok((25.0 * nf * nf.ln() * max * max / (4.0 * c * c * mean_sq)).ceil() as u64)
}

/// Mean of squared bounds, `Σ a_i² / n`.
pub fn mean_square<S: Scalar>(a: &[S]) -> f64 {
    a.iter().map(|v| v.as_f64().powi(2)).sum::<f64>() / a.len() as f64
}

impl<S: Scalar> MabsState<S> {
    /// Uniform-floor sampler with all weights 1.
    pub fn new(n: usize, horizon: usize, a_sq_mean: S, params: MabsParams<S>) -> Result<Self> {
        params.validate()?;
        check_size(n, horizon)?;
        if !(a_sq_mean > S::zero()) || !a_sq_mean.is_finite() {
            return Err(Error::config(format!("mean squared reward bound must be positive, got {a_sq_mean}")));
        }
        let delta = mabs_delta(n, horizon, a_sq_mean.as_f64(), params.eta.as_f64(), params.delta_scale.as_f64());
        Self::assemble(n, horizon, S::of(delta), Floor::Uniform, params)
    }

    /// MABS2: floor `q_i ∝ a_i^{2/5}` built from per-point reward bounds.
    pub fn with_bounds(bounds: &[S], horizon: usize, params: MabsParams<S>) -> Result<Self> {
        params.validate()?;
        let n = bounds.len();
        check_size(n, horizon)?;
        if bounds.iter().any(|a| !(*a >= S::zero()) || !a.is_finite()) {
            return Err(Error::config("reward bounds must be finite and nonnegative"));
        }
        if !bounds.iter().any(|a| *a > S::zero()) {
            return Err(Error::config("reward bounds are all zero"));
        }
        let lifted: Vec<f64> = bounds.iter().map(|a| a.as_f64().max(BOUND_FLOOR)).collect();
        let powered: Vec<f64> = lifted.iter().map(|a| a.powf(0.4)).collect();
        let sum: f64 = powered.iter().sum();
        let q: Vec<S> = powered.iter().map(|v| S::of(v / sum)).collect();
        let delta = mabs2_delta(n, horizon, sum / n as f64, params.eta.as_f64(), params.delta_scale.as_f64());
        let tree = WeightTree::build(&q)?;
        Self::assemble(n, horizon, S::of(delta), Floor::Weighted { q, tree }, params)
    }

    fn assemble(n: usize, horizon: usize, delta: S, floor: Floor<S>, params: MabsParams<S>) -> Result<Self> {
        if !(delta > S::zero()) || !delta.is_finite() {
            return Err(Error::config(format!("derived delta {delta} is not a positive finite number")));
        }
        Ok(MabsState {
            weights: WeightTree::build(&vec![S::one(); n])?,
            floor,
            eta: params.eta,
            delta,
            horizon,
            t: 0,
            log_rescale: 0.0,
            reset_bin: params.reset_bin,
        })
    }

    /// Overrides the step `δ` (used by tests that pin hand-computed values).
    pub fn set_delta(&mut self, delta: S) -> Result<()> {
        if !(delta > S::zero()) || !delta.is_finite() {
            return Err(Error::config(format!("delta must be positive and finite, got {delta}")));
        }
        self.delta = delta;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn eta(&self) -> S {
        self.eta
    }

    pub fn delta(&self) -> S {
        self.delta
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of updates applied so far.
    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn reset_bin(&self) -> Option<usize> {
        self.reset_bin
    }

    pub fn floor(&self) -> &Floor<S> {
        &self.floor
    }

    /// Raw leaf weights (up to the accumulated rescaling factor).
    pub fn weights(&self) -> &[S] {
        self.weights.leaves()
    }

    pub fn weight_tree(&self) -> &WeightTree<S> {
        &self.weights
    }

    /// `ln` of the total factor the stored weights were divided by.
    pub fn log_rescale(&self) -> f64 {
        self.log_rescale
    }

    fn floor_mass(&self, i: usize) -> S {
        match &self.floor {
            Floor::Uniform => S::one() / S::of_usize(self.len()),
            Floor::Weighted { q, .. } => q[i],
        }
    }

    pub fn probability(&self, i: usize) -> S {
        (S::one() - self.eta) * self.weights.leaf(i) / self.weights.total() + self.eta * self.floor_mass(i)
    }

    pub fn probabilities(&self) -> Vec<S> {
        (0..self.len()).map(|i| self.probability(i)).collect()
    }

    /// Draws an index from the current distribution and returns it with its probability.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, S) {
        let coin: f64 = rng.random();
        let index = if coin < self.eta.as_f64() {
            match &self.floor {
                Floor::Uniform => rng.random_range(0..self.len()),
                Floor::Weighted { tree, .. } => tree.sample_counted(S::of(rng.random::<f64>()) * tree.total()).0,
            }
        } else {
            let u = S::of(rng.random::<f64>()) * self.weights.total();
            self.weights.sample_counted(u).0
        };
        (index, self.probability(index))
    }

    /// Multiplies the weight of the drawn index `i` by `exp(δ a / p_i³)`.
    ///
    /// `p_i` is read from the state, which has not changed since the draw.
    pub fn update(&mut self, i: usize, reward: S) -> Result<()> {
        if i >= self.len() {
            return Err(Error::contract(format!("index {i} out of range for {} arms", self.len())));
        }
        if !(reward >= S::zero()) || !reward.is_finite() {
            return Err(Error::contract(format!("reward basis must be finite and nonnegative, got {reward}")));
        }
        let p = self.probability(i).as_f64();
        let exponent = self.delta.as_f64() * reward.as_f64() / (p * p * p);
        if exponent > 0.0 {
            let log_w = self.weights.leaf(i).as_f64().ln() + exponent;
            let limit = WEIGHT_LIMIT.min(S::max_value().as_f64().sqrt()).ln();
            if log_w > limit {
                // Dividing by a power of two keeps every ratio w_j / W exact.
                let ln2 = std::f64::consts::LN_2;
                let k = (log_w / ln2).floor();
                self.weights.scale_all(S::of(2f64.powf(-k)));
                self.log_rescale += k * ln2;
                let rest = (log_w - k * ln2).clamp(0.0, ln2);
                self.weights.update(i, S::of(rest.exp()))?;
            } else {
                self.weights.update(i, S::of(log_w.exp()))?;
            }
        }
        self.t += 1;
        if let Some(bin) = self.reset_bin {
            if self.t.is_multiple_of(bin) {
                self.reset();
            }
        }
        Ok(())
    }

    /// Sets every weight back to 1, making the bandit part uniform again.
    pub fn reset(&mut self) {
        self.weights.fill(S::one());
        self.log_rescale = 0.0;
    }

    /// Multiplies every stored weight by `factor`; the distribution is unaffected.
    pub fn rescale_weights(&mut self, factor: S) {
        self.weights.scale_all(factor);
        self.log_rescale -= factor.as_f64().ln();
    }
}

fn check_size(n: usize, horizon: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::config(format!("bandit sampling needs n >= 2 datapoints, got {n}")));
    }
    if horizon == 0 {
        return Err(Error::config("horizon T must be at least 1"));
    }
    Ok(())
}
