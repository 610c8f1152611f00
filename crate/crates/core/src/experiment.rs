//! Experiment protocols: parallel repeats, the optimum solver, the `τ` sweep
//! and the step-size stability sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{generate_synthetic, scale_for_tau, RepeatSummary, RunSummary, SyntheticConfig};
use crate::metrics::mean_and_std;
use crate::model::{Dataset, ProblemSpec};
use crate::optimize::{run, BoundSource, Method, RunConfig, RunTrace, SamplerConfig, StepSchedule, TraceOptions};
use crate::sampling::{MabsParams, SamplerKind};
use crate::scalar::Scalar;

/// Runs `repeats` independent copies of `cfg` in parallel with seeds
/// `base_seed + k`. The result is ordered by repeat index.
pub fn run_repeats<S: Scalar>(
    spec: &ProblemSpec<S>,
    data: &Dataset<S>,
    cfg: &RunConfig<S>,
    repeats: usize,
    base_seed: u64,
) -> Result<Vec<RunTrace<S>>> {
    (0..repeats)
        .into_par_iter()
        .map(|k| {
            let cfg = RunConfig { seed: base_seed.wrapping_add(k as u64), ..cfg.clone() };
            run(spec, data, &cfg)
        })
        .collect()
}

/// Summary of a set of repeats produced by [`run_repeats`].
pub fn summarize<S: Scalar>(
    label: &str,
    config: serde_json::Value,
    traces: &[RunTrace<S>],
    base_seed: u64,
) -> RunSummary {
    let repeats = traces
        .iter()
        .enumerate()
        .map(|(k, t)| RepeatSummary::from_trace(k, base_seed.wrapping_add(k as u64), t))
        .collect();
    RunSummary::new(label, config, repeats)
}

/// Stopping rule of the deterministic solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once the gradient mapping norm drops below this value.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tolerance: 1e-10, max_iterations: 2_000_000 }
    }
}

/// Result of [`solve_optimum`].
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum<S = f64> {
    pub w: Vec<S>,
    pub objective: f64,
    /// `‖(w - prox(w - s∇f(w), s)) / s‖`, the gradient norm for smooth problems.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Full-batch proximal gradient descent with backtracking line search.
///
/// A step `s` is accepted when both the quadratic upper model holds for `f` and
/// the secant curvature `⟨∇f(w⁺) - ∇f(w), d⟩ / ‖d‖²` is at most `1/s`. The
/// second test stays informative once objective differences fall below roundoff.
pub fn solve_optimum<S: Scalar>(spec: &ProblemSpec<S>, data: &Dataset<S>, opts: SolverOptions) -> Result<Optimum<S>> {
    let mut w = vec![S::zero(); data.dim()];
    let mut f = spec.smooth_cost(data, &w)?.as_f64();
    let mut g = spec.full_gradient(data, &w)?;
    let mut step = 1.0 / spec.smoothness_profile(data).mean.as_f64().max(1e-12);
    let mut gradient_norm = f64::INFINITY;
    for it in 0..opts.max_iterations {
        loop {
            let s = S::of(step);
            let mut next: Vec<S> = w.iter().zip(&g).map(|(wi, gi)| *wi - s * *gi).collect();
            spec.prox_in_place(&mut next, s)?;
            let d: Vec<f64> = next.iter().zip(&w).map(|(a, b)| a.as_f64() - b.as_f64()).collect();
            let d_sq: f64 = d.iter().map(|v| v * v).sum();
            let f_next = spec.smooth_cost(data, &next)?.as_f64();
            let g_next = spec.full_gradient(data, &next)?;
            let model = f + d.iter().zip(&g).map(|(di, gi)| di * gi.as_f64()).sum::<f64>() + d_sq / (2.0 * step);
            let curvature: f64 =
                d.iter().zip(g_next.iter().zip(&g)).map(|(di, (a, b))| di * (a.as_f64() - b.as_f64())).sum();
            let slack = 1e-14 * f.abs().max(1.0);
            if (f_next <= model + slack && curvature <= d_sq / step) || step < 1e-300 {
                gradient_norm = d_sq.sqrt() / step;
                w = next;
                f = f_next;
                g = g_next;
                break;
            }
            step *= 0.5;
        }
        if gradient_norm < opts.tolerance {
            let objective = spec.full_cost(data, &w)?.as_f64();
            return Ok(Optimum { w, objective, gradient_norm, iterations: it + 1, converged: true });
        }
        step *= 1.25;
    }
    let objective = spec.full_cost(data, &w)?.as_f64();
    Ok(Optimum { w, objective, gradient_norm, iterations: opts.max_iterations, converged: false })
}

/// Sampler, bound and step-size settings shared by the sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub method: Method,
    pub samplers: Vec<SamplerKind>,
    pub params: MabsParams<f64>,
    pub bound_source: BoundSource,
    pub iterations: usize,
    pub repeats: usize,
    pub seed: u64,
    pub stride: Option<usize>,
}

impl SweepSettings {
    fn run_config(&self, sampler: SamplerKind, schedule: StepSchedule<f64>) -> RunConfig<f64> {
        let mut cfg = RunConfig::new(self.method, sampler, schedule, self.iterations, self.seed);
        cfg.sampler =
            SamplerConfig { kind: sampler, params: self.params, bound_source: self.bound_source, horizon: None };
        cfg.trace = TraceOptions { stride: self.stride, ..TraceOptions::default() };
        cfg
    }

    fn validate(&self) -> Result<()> {
        if self.samplers.is_empty() {
            return Err(Error::config("at least one sampler is required"));
        }
        if self.repeats == 0 {
            return Err(Error::config("repeats must be at least 1"));
        }
        Ok(())
    }
}

/// Synthetic `τ` sweep of the linear-regression protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct TauSweepConfig {
    pub synthetic: SyntheticConfig,
    pub spec: ProblemSpec<f64>,
    pub taus: Vec<f64>,
    pub schedule: StepSchedule<f64>,
    pub settings: SweepSettings,
    /// Relative tolerance of the `scale_c` bisection.
    pub tau_tolerance: f64,
    pub solver: SolverOptions,
}

impl TauSweepConfig {
    /// `n = 101`, `d = 5`, ridge without regularizer, `γ = 4e-3`, `T = 3000`, `k = 200`.
    pub fn standard(taus: Vec<f64>) -> Result<Self> {
        Ok(TauSweepConfig {
            synthetic: SyntheticConfig::default(),
            spec: ProblemSpec::new(crate::model::Loss::Ridge, crate::model::Regularizer::None, 0.0)?,
            taus,
            schedule: StepSchedule::constant(4e-3),
            settings: SweepSettings {
                method: Method::Sgd,
                samplers: vec![SamplerKind::Uniform, SamplerKind::IsSmoothness, SamplerKind::Mabs],
                params: MabsParams::default(),
                bound_source: BoundSource::InitialGradient,
                iterations: 3000,
                repeats: 200,
                seed: 0,
                stride: None,
            },
            tau_tolerance: 1e-6,
            solver: SolverOptions::default(),
        })
    }
}

/// One `(τ, sampler)` cell of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauRow {
    pub tau_target: f64,
    pub tau: f64,
    pub scale_c: f64,
    pub sampler: SamplerKind,
    pub label: String,
    pub optimum: f64,
    pub mean_gap: f64,
    pub std_gap: f64,
    pub mean_effective_variance: f64,
    pub std_effective_variance: f64,
    pub diverged: usize,
    pub repeats: usize,
}

pub fn tau_sweep(cfg: &TauSweepConfig) -> Result<Vec<TauRow>> {
    cfg.settings.validate()?;
    cfg.schedule.validate()?;
    let mut rows = Vec::new();
    for &target in &cfg.taus {
        let scale_c = scale_for_tau(&cfg.synthetic, &cfg.spec, target, cfg.tau_tolerance)?;
        let data: Dataset = generate_synthetic(&SyntheticConfig { scale_c, ..cfg.synthetic })?;
        let tau = cfg.spec.smoothness_profile(&data).tau;
        let optimum = solve_optimum(&cfg.spec, &data, cfg.solver)?;
        for &sampler in &cfg.settings.samplers {
            let run_cfg = cfg.settings.run_config(sampler, cfg.schedule);
            let traces = run_repeats(&cfg.spec, &data, &run_cfg, cfg.settings.repeats, cfg.settings.seed)?;
            let kept: Vec<&RunTrace> = traces.iter().filter(|t| !t.diverged).collect();
            let gaps: Vec<f64> = kept.iter().map(|t| t.final_objective() - optimum.objective).collect();
            let ves: Vec<f64> = kept.iter().map(|t| t.final_effective_variance()).collect();
            let (mean_gap, std_gap) = finite_or_inf(&gaps, kept.is_empty());
            let (mean_ve, std_ve) = finite_or_inf(&ves, kept.is_empty());
            rows.push(TauRow {
                tau_target: target,
                tau,
                scale_c,
                sampler,
                label: format!("{}_{}", cfg.settings.method.table_name(), sampler.suffix()),
                optimum: optimum.objective,
                mean_gap,
                std_gap,
                mean_effective_variance: mean_ve,
                std_effective_variance: std_ve,
                diverged: traces.len() - kept.len(),
                repeats: traces.len(),
            });
        }
    }
    Ok(rows)
}

fn finite_or_inf(values: &[f64], all_diverged: bool) -> (f64, f64) {
    if all_diverged {
        (f64::INFINITY, f64::NAN)
    } else {
        mean_and_std(values)
    }
}

/// Constant-step stability sweep over a grid of `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityConfig {
    pub spec: ProblemSpec<f64>,
    pub gammas: Vec<f64>,
    pub settings: SweepSettings,
}

/// One `(γ, sampler)` cell of the stability sweep.
///
/// A repeat counts as diverged when its iterate became non-finite or its
/// final objective exceeds the objective at the starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub gamma: f64,
    pub sampler: SamplerKind,
    pub method: Method,
    pub label: String,
    /// Mean final objective over the repeats that did not diverge.
    pub mean_final_objective: f64,
    pub std_final_objective: f64,
    pub initial_objective: f64,
    /// Repeats whose iterate became non-finite.
    pub non_finite: usize,
    pub diverged: usize,
    pub repeats: usize,
}

impl StabilityRow {
    pub fn divergence_fraction(&self) -> f64 {
        self.diverged as f64 / self.repeats as f64
    }

    /// Stable when fewer than half of the repeats diverged.
    pub fn is_stable(&self) -> bool {
        2 * self.diverged < self.repeats
    }
}

pub fn stability_sweep(cfg: &StabilityConfig, data: &Dataset) -> Result<Vec<StabilityRow>> {
    cfg.settings.validate()?;
    if cfg.gammas.is_empty() {
        return Err(Error::config("gamma grid is empty"));
    }
    let w1 = vec![0.0; data.dim()];
    let initial = cfg.spec.full_cost(data, &w1)?;
    let mut rows = Vec::new();
    for &gamma in &cfg.gammas {
        for &sampler in &cfg.settings.samplers {
            let run_cfg = cfg.settings.run_config(sampler, StepSchedule::constant(gamma));
            let traces = run_repeats(&cfg.spec, data, &run_cfg, cfg.settings.repeats, cfg.settings.seed)?;
            let failed = |t: &RunTrace| t.diverged || !(t.final_objective() <= initial);
            let kept: Vec<f64> = traces.iter().filter(|t| !failed(t)).map(|t| t.final_objective()).collect();
            let (mean, std) = finite_or_inf(&kept, kept.is_empty());
            rows.push(StabilityRow {
                gamma,
                sampler,
                method: cfg.settings.method,
                label: format!("{}_{}", cfg.settings.method.table_name(), sampler.suffix()),
                mean_final_objective: mean,
                std_final_objective: std,
                initial_objective: initial,
                non_finite: traces.iter().filter(|t| t.diverged).count(),
                diverged: traces.len() - kept.len(),
                repeats: traces.len(),
            });
        }
    }
    Ok(rows)
}

/// Largest `γ` in the sweep at which `sampler` was stable.
pub fn largest_stable_gamma(rows: &[StabilityRow], sampler: SamplerKind) -> Option<f64> {
    rows.iter()
        .filter(|r| r.sampler == sampler && r.is_stable())
        .map(|r| r.gamma)
        .fold(None, |m, g| Some(m.map_or(g, |m: f64| m.max(g))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Loss, Regularizer};

    #[test]
    fn repeats_are_ordered_and_seeded() {
        let spec = ProblemSpec::new(Loss::Ridge, Regularizer::None, 0.0).unwrap();
        let data: Dataset = generate_synthetic(&SyntheticConfig { n: 12, seed: 3, ..Default::default() }).unwrap();
        let cfg = RunConfig::new(Method::Sgd, SamplerKind::Mabs, StepSchedule::constant(1e-3), 50, 0);
        let traces = run_repeats(&spec, &data, &cfg, 4, 10).unwrap();
        for (k, t) in traces.iter().enumerate() {
            let single = run(&spec, &data, &RunConfig { seed: 10 + k as u64, ..cfg.clone() }).unwrap();
            assert_eq!(&single, t);
        }
        let s = summarize("x", serde_json::json!(null), &traces, 10);
        assert_eq!(s.repeats[3].seed, 13);
    }

    #[test]
    fn solver_reaches_stationarity() {
        let spec = ProblemSpec::new(Loss::Ridge, Regularizer::None, 0.0).unwrap();
        let data: Dataset = generate_synthetic(&SyntheticConfig { seed: 1, ..Default::default() }).unwrap();
        let opt = solve_optimum(&spec, &data, SolverOptions::default()).unwrap();
        assert!(opt.converged);
        let g = spec.full_gradient(&data, &opt.w).unwrap();
        assert!(crate::scalar::norm_sq(&g).sqrt() < 1e-10);

        let l1 = ProblemSpec::new(Loss::Logistic, Regularizer::L1, 0.05).unwrap();
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos(), 1.0]).collect();
        let labels: Vec<f64> = (0..8).map(|i| if i % 3 == 0 { -1.0 } else { 1.0 }).collect();
        let d = Dataset::from_dense(&rows, &labels).unwrap();
        let opt = solve_optimum(&l1, &d, SolverOptions::default()).unwrap();
        assert!(opt.converged);
        // No single-coordinate perturbation improves the objective.
        for j in 0..3 {
            for h in [1e-4, -1e-4] {
                let mut w = opt.w.clone();
                w[j] += h;
                assert!(l1.full_cost(&d, &w).unwrap() >= opt.objective - 1e-12);
            }
        }
    }

    #[test]
    fn largest_stable_gamma_picks_max() {
        let row = |gamma: f64, diverged: usize| StabilityRow {
            gamma,
            sampler: SamplerKind::Uniform,
            method: Method::Sgd,
            label: String::new(),
            mean_final_objective: 0.0,
            std_final_objective: 0.0,
            initial_objective: 1.0,
            non_finite: 0,
            diverged,
            repeats: 4,
        };
        let rows = vec![row(0.1, 0), row(0.5, 1), row(1.0, 3), row(2.0, 4)];
        assert_eq!(largest_stable_gamma(&rows, SamplerKind::Uniform), Some(0.5));
        assert_eq!(largest_stable_gamma(&rows, SamplerKind::Mabs), None);
    }
}
