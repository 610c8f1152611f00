use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Draw made at iteration `t` (1-based) and the reward basis fed back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord<S = f64> {
    pub t: usize,
    pub index: usize,
    pub probability: S,
    pub reward: S,
}

/// Objective and variances of the state reached after `t` iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: usize,
    pub objective: f64,
    pub effective_variance: f64,
    pub pseudo_variance: f64,
}

impl Checkpoint {
    /// Sentinel row recorded when the iterate stops being finite.
    pub fn diverged(t: usize) -> Self {
        Checkpoint { t, objective: f64::INFINITY, effective_variance: f64::INFINITY, pseudo_variance: f64::INFINITY }
    }
}

/// What a run records besides the per-step draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TraceOptions {
    /// Checkpoint every `stride` iterations; `None` uses `n`.
    pub stride: Option<usize>,
    /// Store the full `a^t` and `p^t` vectors at every step. O(nT) memory.
    pub verification: bool,
    /// Store every iterate `w^t`. O(dT) memory.
    pub store_iterates: bool,
}

/// Full reward and probability vectors seen at every step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VerificationHistory<S = f64> {
    pub rewards: Vec<Vec<S>>,
    pub probabilities: Vec<Vec<S>>,
}

/// Everything recorded by one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace<S = f64> {
    pub steps: Vec<StepRecord<S>>,
    pub checkpoints: Vec<Checkpoint>,
    pub final_iterate: Vec<S>,
    /// `2/(T(T+1)) Σ_t t·w^t` over the iterates the completed steps started from.
    pub average_iterate: Vec<S>,
    pub diverged: bool,
    pub history: Option<VerificationHistory<S>>,
    pub iterates: Option<Vec<Vec<S>>>,
}

impl<S: Scalar> RunTrace<S> {
    /// Number of iterations completed (including the one that diverged).
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    pub fn initial(&self) -> Option<&Checkpoint> {
        self.checkpoints.first()
    }

    pub fn last(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }

    /// Final objective value, `+∞` if the run diverged.
    pub fn final_objective(&self) -> f64 {
        if self.diverged {
            return f64::INFINITY;
        }
        self.last().map_or(f64::NAN, |c| c.objective)
    }

    pub fn final_effective_variance(&self) -> f64 {
        if self.diverged {
            return f64::INFINITY;
        }
        self.last().map_or(f64::NAN, |c| c.effective_variance)
    }
}

/// Running form of `2/(T(T+1)) Σ_{t=1}^T t·w^t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAverage {
    sum: Vec<f64>,
    count: usize,
    first: Vec<f64>,
}

impl WeightedAverage {
    pub fn new<S: Scalar>(w1: &[S]) -> Self {
        WeightedAverage { sum: vec![0.0; w1.len()], count: 0, first: w1.iter().map(|v| v.as_f64()).collect() }
    }

    /// Adds the next iterate `w^t` with weight `t`.
    pub fn push<S: Scalar>(&mut self, w: &[S]) {
        self.count += 1;
        let t = self.count as f64;
        for (s, v) in self.sum.iter_mut().zip(w) {
            *s += t * v.as_f64();
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// The weighted average; `w¹` itself when nothing was pushed.
    pub fn value<S: Scalar>(&self) -> Vec<S> {
        if self.count == 0 {
            return self.first.iter().map(|v| S::of(*v)).collect();
        }
        let t = self.count as f64;
        let norm = 2.0 / (t * (t + 1.0));
        self.sum.iter().map(|s| S::of(s * norm)).collect()
    }
}

/// Brute-force weighted average of stored iterates `w¹, …, w^T`.
pub fn weighted_average_iterate<S: Scalar>(iterates: &[Vec<S>]) -> Option<Vec<S>> {
    let first = iterates.first()?;
    let mut avg = WeightedAverage::new(first);
    for w in iterates {
        avg.push(w);
    }
    Some(avg.value())
}
