use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::estimator_variance;
use crate::model::{Dataset, ProblemSpec};
use crate::optimize::{
    apply_step, Checkpoint, EstimatorState, Method, RunTrace, SgdState, StepRecord, StepSchedule, TraceOptions,
    VerificationHistory, WeightedAverage,
};
use crate::sampling::{mean_square, IsState, MabsParams, MabsState, Sampler, SamplerKind};
use crate::scalar::Scalar;

/// Where the per-point reward bounds `a_i` used by the bound-based samplers come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundSource {
    /// `a_i = ‖∇φ_i(w¹)‖² / n²` at the starting point.
    #[default]
    InitialGradient,
    /// `a_i = G_i² / n²` from the worst-case gradient bound over `‖w‖ ≤ R`.
    GradientBound,
}

impl BoundSource {
    pub fn label(self) -> &'static str {
        match self {
            BoundSource::InitialGradient => "initial-gradient",
            BoundSource::GradientBound => "gradient-bound",
        }
    }
}

impl std::str::FromStr for BoundSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "initial-gradient" => Ok(BoundSource::InitialGradient),
            "gradient-bound" => Ok(BoundSource::GradientBound),
            other => Err(Error::config(format!("unknown bound source '{other}'"))),
        }
    }
}

/// Sampler choice plus the knobs of the adaptive variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig<S = f64> {
    pub kind: SamplerKind,
    pub params: MabsParams<S>,
    pub bound_source: BoundSource,
    /// Horizon used to derive `δ`; defaults to the run length.
    pub horizon: Option<usize>,
}

impl<S: Scalar> SamplerConfig<S> {
    pub fn new(kind: SamplerKind) -> Self {
        SamplerConfig { kind, params: MabsParams::default(), bound_source: BoundSource::default(), horizon: None }
    }
}

/// Everything besides the problem and the data that defines a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig<S = f64> {
    pub method: Method,
    pub sampler: SamplerConfig<S>,
    pub schedule: StepSchedule<S>,
    pub iterations: usize,
    pub seed: u64,
    pub trace: TraceOptions,
    /// Starting point `w¹`; zero when absent.
    pub initial: Option<Vec<S>>,
}

impl<S: Scalar> RunConfig<S> {
    pub fn new(method: Method, sampler: SamplerKind, schedule: StepSchedule<S>, iterations: usize, seed: u64) -> Self {
        RunConfig {
            method,
            sampler: SamplerConfig::new(sampler),
            schedule,
            iterations,
            seed,
            trace: TraceOptions::default(),
            initial: None,
        }
    }

    fn initial_point(&self, data: &Dataset<S>) -> Result<Vec<S>> {
        match &self.initial {
            Some(w) => {
                data.check_dim(w)?;
                Ok(w.clone())
            }
            None => Ok(vec![S::zero(); data.dim()]),
        }
    }
}

/// Per-point reward bounds `a_i` from the chosen source.
pub fn reward_bounds<S: Scalar>(
    spec: &ProblemSpec<S>,
    data: &Dataset<S>,
    w1: &[S],
    source: BoundSource,
) -> Result<Vec<S>> {
    let bounds = match source {
        BoundSource::GradientBound => spec.reward_bounds(data)?,
        BoundSource::InitialGradient => {
            let coefs = spec.all_coefficients(data, w1)?;
            let n2 = S::of_usize(data.len()).powi(2);
            data.points().iter().zip(coefs).map(|(p, c)| c * c * p.features.norm_sq() / n2).collect()
        }
    };
    if !bounds.iter().any(|a| *a > S::zero()) {
        return Err(Error::config(format!(
            "reward bounds from {} are all zero; pick another bound source or starting point",
            source.label()
        )));
    }
    Ok(bounds)
}

/// Builds the sampler for a run of `iterations` steps starting at `w1`.
pub fn build_sampler<S: Scalar>(
    cfg: &SamplerConfig<S>,
    spec: &ProblemSpec<S>,
    data: &Dataset<S>,
    w1: &[S],
    iterations: usize,
) -> Result<Sampler<S>> {
    let horizon = cfg.horizon.unwrap_or(iterations).max(1);
    Ok(match cfg.kind {
        SamplerKind::Uniform => Sampler::uniform(data.len())?,
        SamplerKind::IsSmoothness => Sampler::Importance(IsState::from_smoothness(&spec.smoothness_profile(data))?),
        SamplerKind::IsBound => {
            Sampler::Importance(IsState::from_bounds(&reward_bounds(spec, data, w1, cfg.bound_source)?)?)
        }
        SamplerKind::Mabs => {
            let bounds = reward_bounds(spec, data, w1, cfg.bound_source)?;
            Sampler::Bandit(MabsState::new(data.len(), horizon, S::of(mean_square(&bounds)), cfg.params)?)
        }
        SamplerKind::Mabs2 => {
            let bounds = reward_bounds(spec, data, w1, cfg.bound_source)?;
            Sampler::Bandit(MabsState::with_bounds(&bounds, horizon, cfg.params)?)
        }
    })
}

/// Builds the configured sampler and runs.
pub fn run<S: Scalar>(spec: &ProblemSpec<S>, data: &Dataset<S>, cfg: &RunConfig<S>) -> Result<RunTrace<S>> {
    let w1 = cfg.initial_point(data)?;
    let sampler = build_sampler(&cfg.sampler, spec, data, &w1, cfg.iterations)?;
    run_with_sampler(spec, data, cfg, sampler)
}

/// Runs `cfg.iterations` steps with a caller-supplied sampler.
///
/// Each iteration draws `(i, p_i)`, forms `ĝ` and `a_i^t` at the current
/// iterate, applies the update rule and feeds `a_i^t` back to the sampler.
/// A non-finite iterate ends the run with `diverged` set.
pub fn run_with_sampler<S: Scalar>(
    spec: &ProblemSpec<S>,
    data: &Dataset<S>,
    cfg: &RunConfig<S>,
    mut sampler: Sampler<S>,
) -> Result<RunTrace<S>> {
    cfg.schedule.validate()?;
    let n = data.len();
    let stride = cfg.trace.stride.unwrap_or(n);
    if stride == 0 {
        return Err(Error::config("record stride must be positive"));
    }
    if sampler.len() != n {
        return Err(Error::config(format!("sampler covers {} points but the dataset has {n}", sampler.len())));
    }
    let w1 = cfg.initial_point(data)?;
    let mut estimator = EstimatorState::new(cfg.method.estimator(), spec, data, &w1)?;
    let mut state = SgdState::new(w1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut average = WeightedAverage::new(&state.w);
    let mut g_hat = vec![S::zero(); data.dim()];

    let mut trace = RunTrace {
        steps: Vec::with_capacity(cfg.iterations),
        checkpoints: Vec::with_capacity(cfg.iterations / stride + 2),
        final_iterate: Vec::new(),
        average_iterate: Vec::new(),
        diverged: false,
        history: cfg.trace.verification.then(VerificationHistory::default),
        iterates: cfg.trace.store_iterates.then(Vec::new),
    };
    trace.checkpoints.push(checkpoint(0, spec, data, &state.w, &estimator, &sampler)?);

    for t in 1..=cfg.iterations {
        if let Some(h) = trace.history.as_mut() {
            h.probabilities.push(sampler.probabilities());
            h.rewards.push(estimator.all_rewards(spec, data, &state.w)?);
        }
        if let Some(it) = trace.iterates.as_mut() {
            it.push(state.w.clone());
        }
        let (i, p_i) = sampler.draw(&mut rng);
        let (reward, coefficient) = estimator.estimate_into(spec, data, &state.w, i, p_i, &mut g_hat)?;
        trace.steps.push(StepRecord { t, index: i, probability: p_i, reward });
        if !reward.is_finite() || g_hat.iter().any(|g| !g.is_finite()) {
            state.w.iter_mut().for_each(|v| *v = S::nan());
            trace.diverged = true;
            trace.checkpoints.push(Checkpoint::diverged(t));
            break;
        }
        average.push(&state.w);
        estimator.after_step(spec, data, i, &state.w, coefficient)?;
        apply_step(cfg.method, &mut state, &g_hat, &cfg.schedule, spec)?;
        if !state.is_finite() {
            trace.diverged = true;
            trace.checkpoints.push(Checkpoint::diverged(t));
            break;
        }
        sampler.update(i, reward)?;
        if t % stride == 0 || t == cfg.iterations {
            trace.checkpoints.push(checkpoint(t, spec, data, &state.w, &estimator, &sampler)?);
        }
    }
    trace.average_iterate = average.value();
    trace.final_iterate = state.w;
    Ok(trace)
}

fn checkpoint<S: Scalar>(
    t: usize,
    spec: &ProblemSpec<S>,
    data: &Dataset<S>,
    w: &[S],
    estimator: &EstimatorState<S>,
    sampler: &Sampler<S>,
) -> Result<Checkpoint> {
    let objective = spec.full_cost(data, w)?.as_f64();
    let v = estimator_variance(estimator, spec, data, w, &sampler.probabilities())?;
    Ok(Checkpoint { t, objective, effective_variance: v.effective, pseudo_variance: v.pseudo })
}
