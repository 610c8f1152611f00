//! Acceptance criteria, one PASS/FAIL/SKIP line each.
//!
//! Runs without the libtest harness so the report is always printed. The
//! process fails when a criterion fails, except for those in `REPORT_ONLY`,
//! whose outcome is printed but does not fail the build.
//!
//! Criteria 10 and 11 need a LIBSVM copy of w8a: set `MABS_W8A` to its path.
//! `MABS_W8A_POINTS` caps the number of points used (default 5000, taken at an
//! even stride through the file).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use mabs_core::experiment::{
    largest_stable_gamma, run_repeats, stability_sweep, tau_sweep, StabilityConfig, SweepSettings, TauRow,
    TauSweepConfig,
};
use mabs_core::f64s::{Dataset, ProblemSpec};
use mabs_core::io::{read_libsvm, LabelMode, LibsvmOptions};
use mabs_core::metrics::BoundReport;
use mabs_core::model::{Loss, Regularizer};
use mabs_core::optimize::{BoundSource, Method, RunConfig, StepSchedule};
use mabs_core::sampling::{MabsParams, SamplerKind};
use mabs_core::verify::{
    verify_bound, verify_gradients, verify_lemma1, verify_oracles, verify_prox, verify_tree, verify_unbiasedness,
    verify_variance, SuiteReport,
};

/// Criteria whose failure is reported without failing the run.
const REPORT_ONLY: &[u32] = &[7];

const SEED: u64 = 20_240_601;

enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    status: Status,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: impl Into<String>) -> Self {
        Outcome { status: if ok { Status::Pass } else { Status::Fail }, detail: detail.into() }
    }

    fn skip(detail: impl Into<String>) -> Self {
        Outcome { status: Status::Skip, detail: detail.into() }
    }

    fn suite(report: &SuiteReport) -> Self {
        let mut detail =
            format!("{} cases, {} failed, max error {:.3e}", report.cases, report.failed, report.max_error);
        if let Some(first) = report.counterexamples.first() {
            detail.push_str(&format!("; first counterexample: {first}"));
        }
        Outcome::check(report.passed(), detail)
    }
}

fn both(a: Outcome, b: Outcome) -> Outcome {
    let ok = matches!(a.status, Status::Pass) && matches!(b.status, Status::Pass);
    Outcome::check(ok, format!("{}; {}", a.detail, b.detail))
}

fn criterion_1() -> Outcome {
    Outcome::suite(&verify_unbiasedness(100, SEED).unwrap())
}

fn criterion_2() -> Outcome {
    Outcome::suite(&verify_variance(100, SEED).unwrap())
}

fn criterion_3() -> Outcome {
    Outcome::suite(&verify_oracles(5, SEED).unwrap())
}

fn criterion_4() -> Outcome {
    let (report, bounds) = verify_bound(20, SEED).unwrap();
    let worst = bounds.iter().map(|b: &BoundReport| b.lhs / (b.oracle * 3.0 + b.additive)).fold(0.0f64, f64::max);
    let preconditions = bounds.iter().all(|b| b.precondition_met && b.rewards_within_bounds);
    let mut out = Outcome::suite(&report);
    out.detail.push_str(&format!("; worst lhs/rhs {worst:.3e}; horizon condition met on all seeds: {preconditions}"));
    if !preconditions {
        out.status = Status::Fail;
    }
    out
}

fn criterion_5() -> Outcome {
    Outcome::suite(&verify_lemma1(10_000, SEED).unwrap())
}

fn criterion_6() -> Outcome {
    let report = verify_tree(100_000, SEED).unwrap();
    // Three of the cases are the per-size visit checks; the rest are shared-u draws.
    let draws = report.cases.saturating_sub(3);
    let detail = format!(
        "{draws} shared-u draws over n in {{16, 1024, 65536}}, {} mismatches or visit violations, max node visits {} (limit 34 at n=65536)",
        report.failed, report.max_error
    );
    Outcome::check(report.passed() && draws >= 100_000, detail)
}

fn cell(rows: &[TauRow], tau: f64, sampler: SamplerKind) -> &TauRow {
    rows.iter().find(|r| r.tau_target == tau && r.sampler == sampler).expect("sweep cell present")
}

fn criterion_7() -> Outcome {
    let taus = vec![4.0, 10.0, 20.0, 40.0, 80.0];
    let mut cfg = TauSweepConfig::standard(taus.clone()).unwrap();
    cfg.settings.repeats = 50;
    let rows = tau_sweep(&cfg).unwrap();
    let (smallest, largest) = (taus[0], taus[taus.len() - 1]);
    let [u, is, mabs] =
        [SamplerKind::Uniform, SamplerKind::IsSmoothness, SamplerKind::Mabs].map(|s| cell(&rows, largest, s));
    let ve_order = mabs.mean_effective_variance < is.mean_effective_variance
        && is.mean_effective_variance < u.mean_effective_variance;
    let gap_best = mabs.mean_gap < is.mean_gap && mabs.mean_gap < u.mean_gap;
    let mabs_40 = cell(&rows, 40.0, SamplerKind::Mabs).mean_effective_variance;
    let mabs_small = cell(&rows, smallest, SamplerKind::Mabs).mean_effective_variance;
    let decreasing = mabs_40 < mabs_small;
    let detail = format!(
        "tau={largest}: V_e U {:.4e} IS {:.4e} MABS {:.4e} (MABS<IS<U: {ve_order}); \
         gap U {:.4e} IS {:.4e} MABS {:.4e} (MABS smallest: {gap_best}); \
         MABS V_e tau=40 {mabs_40:.4e} vs tau={smallest} {mabs_small:.4e} (decreasing: {decreasing})",
        u.mean_effective_variance,
        is.mean_effective_variance,
        mabs.mean_effective_variance,
        u.mean_gap,
        is.mean_gap,
        mabs.mean_gap,
    );
    Outcome::check(ve_order && gap_best && decreasing, detail)
}

fn criterion_8() -> Outcome {
    both(Outcome::suite(&verify_gradients(300, SEED).unwrap()), Outcome::suite(&verify_prox(300, 1000, SEED).unwrap()))
}

fn mabs_bin() -> &'static str {
    env!("CARGO_BIN_EXE_mabs")
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let e = e.unwrap();
            let name = e.file_name().into_string().unwrap();
            name.ends_with(".csv").then(|| (name, fs::read(e.path()).unwrap()))
        })
        .collect();
    files.sort();
    files
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::TempDir::new().unwrap();
    let config = tmp.path().join("exp.toml");
    fs::write(
        &config,
        "sampler = \"mabs\"\nT = 1000\nrepeats = 6\nseed = 11\ntaus = [4.0, 20.0]\ngammas = [0.001, 0.01, 0.05]\n\
         [synthetic]\nn = 40\nseed = 1\n",
    )
    .unwrap();
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for cmd in ["run", "tau-sweep", "stability-sweep"] {
        let mut outputs = Vec::new();
        for (k, threads) in ["1", "4"].iter().enumerate() {
            let out: PathBuf = tmp.path().join(format!("{cmd}-{k}"));
            let status = Command::new(mabs_bin())
                .args([cmd, "--config", config.to_str().unwrap(), "--threads", threads, "--out", out.to_str().unwrap()])
                .output()
                .unwrap();
            if !status.status.success() {
                return Outcome::check(false, format!("{cmd} failed: {}", String::from_utf8_lossy(&status.stderr)));
            }
            outputs.push(csv_files(&out));
        }
        compared += outputs[0].len();
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            mismatched.push(cmd);
        }
    }
    Outcome::check(
        mismatched.is_empty(),
        format!("{compared} CSV files compared across run/tau-sweep/stability-sweep; mismatched: {mismatched:?}"),
    )
}

fn w8a() -> Option<Dataset> {
    let path = std::env::var_os("MABS_W8A")?;
    let full: Dataset = read_libsvm(&path, LibsvmOptions::new(LabelMode::Classification)).expect("readable w8a");
    let cap: usize = std::env::var("MABS_W8A_POINTS").ok().and_then(|v| v.parse().ok()).unwrap_or(5000);
    if full.len() <= cap {
        return Some(full);
    }
    let stride = full.len() as f64 / cap as f64;
    let points = (0..cap).map(|k| full.point((k as f64 * stride) as usize).clone()).collect();
    Some(Dataset::new(points, full.dim()).unwrap())
}

fn real_spec() -> ProblemSpec {
    ProblemSpec::new(Loss::Logistic, Regularizer::L1, 1e-4).unwrap()
}

fn criterion_10(data: Option<&Dataset>) -> Outcome {
    let Some(data) = data else {
        return Outcome::skip("set MABS_W8A to a LIBSVM copy of w8a");
    };
    let spec = real_spec();
    let repeats = 20;
    let final_f = |sampler| -> Vec<f64> {
        let cfg = RunConfig::new(Method::Sgd, sampler, StepSchedule::constant(1.0), 30 * data.len(), SEED);
        run_repeats(&spec, data, &cfg, repeats, SEED).unwrap().iter().map(|t| t.final_objective()).collect()
    };
    let (u, m) = (final_f(SamplerKind::Uniform), final_f(SamplerKind::Mabs));
    let wins = u.iter().zip(&m).filter(|(u, m)| m <= u).count();
    Outcome::check(
        wins * 5 >= repeats * 4,
        format!("n={}: SGD_MABS final F <= SGD_U final F on {wins}/{repeats} repeats", data.len()),
    )
}

fn criterion_11(data: Option<&Dataset>) -> Outcome {
    let Some(data) = data else {
        return Outcome::skip("set MABS_W8A to a LIBSVM copy of w8a");
    };
    let cfg = StabilityConfig {
        spec: real_spec(),
        gammas: vec![0.1, 0.5, 1.0, 2.0, 5.0],
        settings: SweepSettings {
            method: Method::Sgd,
            samplers: vec![SamplerKind::Uniform, SamplerKind::Mabs],
            params: MabsParams::default(),
            bound_source: BoundSource::InitialGradient,
            iterations: 60 * data.len(),
            repeats: 20,
            seed: SEED,
            stride: None,
        },
    };
    let rows = stability_sweep(&cfg, data).unwrap();
    let u = largest_stable_gamma(&rows, SamplerKind::Uniform);
    let m = largest_stable_gamma(&rows, SamplerKind::Mabs);
    let ok = match (m, u) {
        (Some(m), Some(u)) => m >= u,
        (Some(_), None) => true,
        (None, other) => other.is_none(),
    };
    Outcome::check(ok, format!("largest stable gamma: SGD_MABS {m:?}, SGD_U {u:?}"))
}

fn main() {
    type Job<'a> = Box<dyn FnOnce() -> Outcome + 'a>;
    let data = w8a();
    let criteria: Vec<(u32, &str, Duration, Job)> = vec![
        (1, "unbiasedness oracle", Duration::from_secs(1), Box::new(criterion_1)),
        (2, "variance decomposition", Duration::from_secs(1), Box::new(criterion_2)),
        (3, "optimal-distribution oracles", Duration::from_secs(10), Box::new(criterion_3)),
        (4, "regret bound on 20 seeds", Duration::from_secs(60), Box::new(criterion_4)),
        (5, "mixing inequality property", Duration::from_secs(5), Box::new(criterion_5)),
        (6, "sum-tree equivalence and complexity", Duration::from_secs(10), Box::new(criterion_6)),
        (7, "tau-sweep trend", Duration::from_secs(600), Box::new(criterion_7)),
        (8, "gradient and prox correctness", Duration::from_secs(5), Box::new(criterion_8)),
        (9, "determinism", Duration::from_secs(60), Box::new(criterion_9)),
        (10, "real-data ordering", Duration::from_secs(900), Box::new(|| criterion_10(data.as_ref()))),
        (11, "stability sweep shape", Duration::from_secs(900), Box::new(|| criterion_11(data.as_ref()))),
    ];
    let mut fatal = Vec::new();
    for (id, name, budget, job) in criteria {
        let start = Instant::now();
        let outcome = job();
        let elapsed = start.elapsed();
        let label = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        let over = if elapsed > budget && !matches!(outcome.status, Status::Skip) {
            format!(" (over the {budget:?} budget)")
        } else {
            String::new()
        };
        println!("{label} criterion {id:>2} {name} [{elapsed:.2?}{over}]: {}", outcome.detail);
        if matches!(outcome.status, Status::Fail) && !REPORT_ONLY.contains(&id) {
            fatal.push(id);
        }
    }
    if !fatal.is_empty() {
        eprintln!("failed criteria: {fatal:?}");
        std::process::exit(1);
    }
}
