//! Property suites run at fixed seeds, each against an independent oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{generate_synthetic, SyntheticConfig};
use crate::metrics::{
    effective_variance, estimator_variance, lemma1_sides, optimal_static_p, optimal_stepwise_p, regret_bound_check,
    BoundReport, CHECK_TOLERANCE, DEFAULT_BOUND_CONSTANT,
};
use crate::model::{DataPoint, Dataset, Loss, ProblemSpec, Regularizer};
use crate::optimize::{
    run, BoundSource, EstimatorState, Method, ProxSvrgState, RunConfig, SagaState, StepSchedule, TraceOptions,
};
use crate::sampling::{mabs_t_condition, SamplerKind, WeightTree};

/// Counterexamples kept per report.
const MAX_COUNTEREXAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Unbiasedness,
    Variance,
    Oracles,
    Bound,
    Lemma1,
    Tree,
    Gradients,
    Prox,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Unbiasedness,
        Suite::Variance,
        Suite::Oracles,
        Suite::Bound,
        Suite::Lemma1,
        Suite::Tree,
        Suite::Gradients,
        Suite::Prox,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Suite::Unbiasedness => "unbiasedness",
            Suite::Variance => "variance",
            Suite::Oracles => "oracles",
            Suite::Bound => "bound",
            Suite::Lemma1 => "lemma1",
            Suite::Tree => "tree",
            Suite::Gradients => "gradients",
            Suite::Prox => "prox",
        }
    }

    /// Runs the suite at its default size.
    pub fn run(self, seed: u64) -> Result<SuiteReport> {
        match self {
            Suite::Unbiasedness => verify_unbiasedness(100, seed),
            Suite::Variance => verify_variance(100, seed),
            Suite::Oracles => verify_oracles(5, seed),
            Suite::Bound => verify_bound(20, seed).map(|(r, _)| r),
            Suite::Lemma1 => verify_lemma1(10_000, seed),
            Suite::Tree => verify_tree(100_000, seed),
            Suite::Gradients => verify_gradients(300, seed),
            Suite::Prox => verify_prox(50, 1000, seed),
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|k| k.label() == s).ok_or_else(|| Error::config(format!("unknown suite '{s}'")))
    }
}

/// Machine-readable outcome of one suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub cases: usize,
    pub failed: usize,
    /// Largest observed violation or error, in the suite's own units.
    pub max_error: f64,
    pub counterexamples: Vec<String>,
}

impl SuiteReport {
    fn new(suite: Suite) -> Self {
        SuiteReport { suite: suite.label().into(), cases: 0, failed: 0, max_error: 0.0, counterexamples: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.failed == 0 && self.cases > 0
    }

    fn record(&mut self, error: f64, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if error.is_nan() || error > self.max_error {
            self.max_error = error;
        }
        if !ok {
            self.failed += 1;
            if self.counterexamples.len() < MAX_COUNTEREXAMPLES {
                self.counterexamples.push(describe());
            }
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Random point on the simplex with every entry positive.
pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

const LOSSES: [Loss; 3] = [Loss::Logistic, Loss::SquaredHinge, Loss::Ridge];

/// Small dense instance with Gaussian features; classification losses get `±1` labels.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, d: usize, loss: Loss) -> Result<(ProblemSpec, Dataset)> {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| normal(rng)).collect()).collect();
    let labels: Vec<f64> = (0..n)
        .map(|_| {
            let y = normal(rng);
            if loss.is_classification() {
                if y >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            } else {
                y
            }
        })
        .collect();
    Ok((ProblemSpec::new(loss, Regularizer::None, 0.0)?, Dataset::from_dense(&rows, &labels)?))
}

fn random_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| normal(rng)).collect()
}

/// Estimator states of all three kinds, with anchors at random points.
fn random_states(rng: &mut ChaCha8Rng, spec: &ProblemSpec, data: &Dataset) -> Result<Vec<EstimatorState>> {
    let d = data.dim();
    let svrg = ProxSvrgState::new(spec, data, &random_vector(rng, d))?;
    let mut saga = SagaState::new(spec, data, &vec![0.0; d])?;
    for i in 0..data.len() {
        saga.coefficients[i] = spec.gradient_coefficient(data.point(i), &random_vector(rng, d))?;
    }
    saga.table_mean = saga.exact_mean(data);
    Ok(vec![EstimatorState::PlainSgd, EstimatorState::ProxSvrg(svrg), EstimatorState::Saga(saga)])
}

/// `Σ_i p_i ĝ(i)` equals `∇f(w)` for every estimator (the anchor terms cancel in expectation).
pub fn verify_unbiasedness(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::new(Suite::Unbiasedness);
    for case in 0..cases {
        let n = rng.random_range(1..=10);
        let d = rng.random_range(1..=4);
        let loss = LOSSES[case % 3];
        let (spec, data) = random_instance(&mut rng, n, d, loss)?;
        let w = random_vector(&mut rng, d);
        let p = random_simplex(&mut rng, n);
        let target = spec.full_gradient(&data, &w)?;
        for state in random_states(&mut rng, &spec, &data)? {
            let mut mean = vec![0.0; d];
            for (i, pi) in p.iter().enumerate() {
                let est = state.estimate(&spec, &data, &w, i, *pi)?;
                for (m, g) in mean.iter_mut().zip(&est.g_hat) {
                    *m += pi * g;
                }
            }
            let err = mean.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            report.record(err, err <= 1e-12, || {
                format!("{:?} {loss:?} n={n} w={w:?} p={p:?}: E ĝ={mean:?} target={target:?}", state.kind())
            });
        }
    }
    Ok(report)
}

/// `Σ a_i/p_i − ‖mean correction‖²` equals `Σ_i p_i ‖ĝ(i) − Eĝ‖²` computed by enumeration.
pub fn verify_variance(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::new(Suite::Variance);
    for case in 0..cases {
        let n = rng.random_range(1..=10);
        let d = rng.random_range(1..=4);
        let loss = LOSSES[case % 3];
        let (spec, data) = random_instance(&mut rng, n, d, loss)?;
        let w = random_vector(&mut rng, d);
        let p = random_simplex(&mut rng, n);
        for state in random_states(&mut rng, &spec, &data)? {
            let outcomes: Vec<Vec<f64>> =
                (0..n).map(|i| state.estimate(&spec, &data, &w, i, p[i]).map(|e| e.g_hat)).collect::<Result<_>>()?;
            let mut mean = vec![0.0; d];
            for (pi, g) in p.iter().zip(&outcomes) {
                for (m, gj) in mean.iter_mut().zip(g) {
                    *m += pi * gj;
                }
            }
            let brute: f64 = p
                .iter()
                .zip(&outcomes)
                .map(|(pi, g)| pi * g.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                .sum();
            let report_v = estimator_variance(&state, &spec, &data, &w, &p)?;
            let err = (report_v.pseudo - brute).abs();
            report.record(err, err <= 1e-10, || {
                format!("{:?} {loss:?} n={n}: pseudo={} brute={brute}", state.kind(), report_v.pseudo)
            });
        }
    }
    Ok(report)
}

/// Minimum of `Σ A_i/p_i` over the simplex grid of resolution `1/steps` for `n = 3`.
fn grid_minimum(a: &[f64; 3], steps: usize) -> f64 {
    let mut best = f64::INFINITY;
    for i in 1..steps {
        for j in 1..steps - i {
            let p = [i as f64 / steps as f64, j as f64 / steps as f64, (steps - i - j) as f64 / steps as f64];
            let v: f64 = a.iter().zip(&p).map(|(x, q)| x / q).sum();
            best = best.min(v);
        }
    }
    best
}

/// Closed-form stepwise and static optima beat a `1e-3` simplex grid for `n = 3`.
pub fn verify_oracles(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::new(Suite::Oracles);
    for case in 0..cases {
        let loss = LOSSES[case % 3];
        let (spec, data) = random_instance(&mut rng, 3, 3, loss)?;
        let w = random_vector(&mut rng, 3);
        let rewards = EstimatorState::PlainSgd.all_rewards(&spec, &data, &w)?;
        let stepwise = optimal_stepwise_p(&spec, &data, &w)?;
        let a = [rewards[0], rewards[1], rewards[2]];
        let grid = grid_minimum(&a, 1000);
        let closed = effective_variance(&rewards, &stepwise.p)?;
        let gap = closed - grid;
        report.record(gap, gap <= 1e-6, || format!("stepwise a={a:?}: closed form {closed} vs grid {grid}"));

        let horizon = rng.random_range(1..=20);
        let history: Vec<Vec<f64>> = (0..horizon).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let totals: Vec<f64> = (0..3).map(|i| history.iter().map(|h| h[i]).sum()).collect();
        let p_star = optimal_static_p(&history)?;
        let closed = effective_variance(&totals, &p_star.p)?;
        let grid = grid_minimum(&[totals[0], totals[1], totals[2]], 1000);
        let gap = closed - grid;
        report.record(gap, gap <= 1e-6, || format!("static A={totals:?}: closed form {closed} vs grid {grid}"));
    }
    Ok(report)
}

/// Logistic instance with `n` points whose reward bounds `‖x_i‖²/n²` hold for every iterate.
pub fn bound_instance(n: usize, seed: u64) -> Result<(ProblemSpec, Dataset)> {
    let base: Dataset = generate_synthetic(&SyntheticConfig { n, d: 5, scale_c: 3.0, seed, ..Default::default() })?;
    let points = base
        .points()
        .iter()
        .map(|p| DataPoint::new(p.features.clone(), if p.label >= 0.0 { 1.0 } else { -1.0 }))
        .collect();
    let data = Dataset::new(points, base.dim())?;
    let spec = ProblemSpec::new(Loss::Logistic, Regularizer::None, 0.0)?;
    Ok((spec, data))
}

/// MABS runs of length `T = mabs_t_condition(n, a, 1)` on `n = 10` instances meet the regret bound.
pub fn verify_bound(seeds: usize, base_seed: u64) -> Result<(SuiteReport, Vec<BoundReport>)> {
    let mut report = SuiteReport::new(Suite::Bound);
    let mut details = Vec::with_capacity(seeds);
    for k in 0..seeds {
        let seed = base_seed.wrapping_add(k as u64);
        let (spec, data) = bound_instance(10, seed)?;
        let bounds = spec.reward_bounds(&data)?;
        let horizon = mabs_t_condition(data.len(), &bounds, 1.0)? as usize;
        let mut cfg = RunConfig::new(Method::Sgd, SamplerKind::Mabs, StepSchedule::constant(0.1), horizon, seed);
        cfg.sampler.bound_source = BoundSource::GradientBound;
        cfg.trace = TraceOptions { stride: Some(horizon.max(1)), verification: true, store_iterates: false };
        let trace = run(&spec, &data, &cfg)?;
        let history = trace.history.as_ref().ok_or_else(|| Error::contract("verification history missing"))?;
        let r = regret_bound_check(&history.rewards, &history.probabilities, &bounds, DEFAULT_BOUND_CONSTANT)?;
        let ok = r.satisfied && r.precondition_met && r.rewards_within_bounds;
        let slack = r.lhs - (3.0 * r.oracle + r.additive);
        report.record(slack.max(0.0), ok, || format!("seed {seed}, T={horizon}: {r:?}"));
        details.push(r);
    }
    Ok((report, details))
}

/// The mixing inequality of [`lemma1_sides`] on random `(a, p1, p2, ζ ∈ [-1, 1])`.
pub fn verify_lemma1(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::new(Suite::Lemma1);
    for _ in 0..cases {
        let n = rng.random_range(2..=10);
        let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let p1 = random_simplex(&mut rng, n);
        let p2 = random_simplex(&mut rng, n);
        let zeta = rng.random_range(-1.0..=1.0);
        let (lhs, rhs) = lemma1_sides(&a, &p1, &p2, zeta)?;
        let violation = lhs - rhs;
        report.record(violation.max(0.0), violation <= CHECK_TOLERANCE, || {
            format!("a={a:?} p1={p1:?} p2={p2:?} zeta={zeta}: lhs={lhs} rhs={rhs}")
        });
    }
    Ok(report)
}

fn linear_scan(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Tree sampling agrees with a linear scan under shared `u`, and every sample
/// and update visits at most `2(⌈log₂ n⌉ + 1)` nodes.
///
/// Weights are small integers so partial sums are exact in either order.
pub fn verify_tree(operations: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::new(Suite::Tree);
    for (n, ops) in [(16usize, operations), (1024, operations), (65536, operations / 50)] {
        let limit = 2 * (n.next_power_of_two().trailing_zeros() as usize + 1);
        let mut weights: Vec<f64> = (0..n).map(|_| rng.random_range(0..1000) as f64).collect();
        weights[0] = 1.0;
        let mut tree = WeightTree::build(&weights)?;
        let mut max_visits = 0usize;
        for op in 0..ops {
            if rng.random_bool(0.5) {
                let i = rng.random_range(0..n);
                let w = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(1..1000) as f64 };
                if w == 0.0 && weights.iter().enumerate().all(|(j, v)| j == i || *v == 0.0) {
                    continue;
                }
                weights[i] = w;
                max_visits = max_visits.max(tree.update_counted(i, w)?);
            } else {
                let u = rng.random::<f64>() * tree.total();
                let (got, visits) = tree.sample_counted(u);
                max_visits = max_visits.max(visits);
                let want = linear_scan(&weights, u);
                report.record(0.0, got == want, || format!("n={n} op={op} u={u}: tree {got}, linear scan {want}"));
            }
        }
        report.record(max_visits as f64, max_visits <= limit, || {
            format!("n={n}: {max_visits} node visits exceed {limit}")
        });
    }
    Ok(report)
}

/// Central finite differences of `φ_i` match the analytic gradients (relative error `< 1e-5`).
pub fn verify_gradients(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::new(Suite::Gradients);
    let h = 1e-6;
    for case in 0..cases {
        let loss = LOSSES[case % 3];
        let d = rng.random_range(1..=6);
        let (spec, data) = random_instance(&mut rng, 1, d, loss)?;
        let point = data.point(0);
        let w = random_vector(&mut rng, d);
        let g = spec.sub_gradient(point, &w)?.to_dense(d);
        let mut diff_sq = 0.0;
        for j in 0..d {
            let mut up = w.clone();
            let mut down = w.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (spec.sub_cost(point, &up)? - spec.sub_cost(point, &down)?) / (2.0 * h);
            diff_sq += (fd - g[j]).powi(2);
        }
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel = diff_sq.sqrt() / norm.max(1e-6);
        report.record(rel, rel < 1e-5, || format!("{loss:?} w={w:?}: relative error {rel}"));
    }
    Ok(report)
}

/// The prox output is no worse than `perturbations` random points around it.
pub fn verify_prox(cases: usize, perturbations: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::new(Suite::Prox);
    for case in 0..cases {
        let reg = [Regularizer::L1, Regularizer::L2, Regularizer::None][case % 3];
        let lambda = rng.random_range(0.0..2.0);
        let step = rng.random_range(0.01..2.0);
        let spec = ProblemSpec::new(Loss::Ridge, reg, lambda)?;
        let d = rng.random_range(1..=5);
        let v = random_vector(&mut rng, d);
        let u = spec.prox(&v, step)?;
        let objective = |x: &[f64]| -> f64 {
            lambda * spec.reg_value(x) + x.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (2.0 * step)
        };
        let at_prox = objective(&u);
        let mut worst = f64::NEG_INFINITY;
        for k in 0..perturbations {
            let scale = 10f64.powi(-((k % 6) as i32));
            let x: Vec<f64> = u.iter().map(|ui| ui + scale * normal(&mut rng)).collect();
            worst = worst.max(at_prox - objective(&x));
        }
        report.record(worst.max(0.0), worst <= 1e-12, || {
            format!("{reg:?} lambda={lambda} step={step} v={v:?}: perturbation improves by {worst}")
        });
    }
    Ok(report)
}
