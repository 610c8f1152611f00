//! Command implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mabs_core::experiment::{
    run_repeats, stability_sweep as sweep_stability, summarize, tau_sweep as sweep_tau, StabilityConfig, StabilityRow,
    SweepSettings, TauRow, TauSweepConfig,
};
use mabs_core::f64s::{Dataset, ProblemSpec, RunConfig};
use mabs_core::io::{
    format_float, generate_synthetic, read_libsvm, write_summary_file, write_trace_file, LabelMode, LibsvmOptions,
    SyntheticConfig,
};
use mabs_core::model::{Loss, Regularizer};
use mabs_core::optimize::{BoundSource, Method, SamplerConfig, StepSchedule, TraceOptions};
use mabs_core::sampling::{MabsParams, SamplerKind};
use mabs_core::verify::Suite;
use serde::Serialize;

use crate::config::Settings;
use crate::Failure;

const DEFAULT_TAUS: [f64; 5] = [4.0, 10.0, 20.0, 40.0, 80.0];
const DEFAULT_GAMMAS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Protocol {
    Run,
    Tau,
    Stability,
}

/// Fills the problem and dataset defaults that do not depend on the data.
fn fill_problem(s: &mut Settings, protocol: Protocol) {
    s.dataset.get_or_insert_with(|| "synthetic".into());
    if s.is_synthetic() {
        s.synthetic.get_or_insert_with(SyntheticConfig::default);
        s.loss.get_or_insert(Loss::Ridge);
        s.reg.get_or_insert(Regularizer::None);
        s.lambda.get_or_insert(0.0);
    } else {
        s.loss.get_or_insert(Loss::Logistic);
        s.reg.get_or_insert(Regularizer::L1);
        s.lambda.get_or_insert(1e-4);
    }
    let labels = if s.loss == Some(Loss::Ridge) { LabelMode::Regression } else { LabelMode::Classification };
    s.labels.get_or_insert(labels);
    s.estimator.get_or_insert(Method::Sgd);
    s.bound_source.get_or_insert(BoundSource::default());
    s.eta.get_or_insert(s.eta_or_default());
    s.t_scale.get_or_insert(1.0);
    s.seed.get_or_insert(0);
    s.out.get_or_insert_with(|| PathBuf::from("out"));
    if s.schedule.is_none() && s.gamma.is_none() {
        let gamma = match (protocol, s.is_synthetic(), s.estimator) {
            (_, true, _) => 4e-3,
            (_, false, Some(Method::ProxSvrg)) => 2.0,
            _ => 1.0,
        };
        s.gamma = Some(gamma);
    }
    match protocol {
        Protocol::Run => {
            s.sampler.get_or_insert(SamplerKind::Uniform);
            s.repeats.get_or_insert(1);
        }
        Protocol::Tau => {
            s.samplers.get_or_insert_with(|| vec![SamplerKind::Uniform, SamplerKind::IsSmoothness, SamplerKind::Mabs]);
            s.taus.get_or_insert_with(|| DEFAULT_TAUS.to_vec());
            s.iterations.get_or_insert(3000);
            s.repeats.get_or_insert(200);
        }
        Protocol::Stability => {
            s.samplers.get_or_insert_with(|| vec![SamplerKind::Uniform, SamplerKind::Mabs]);
            s.gammas.get_or_insert_with(|| DEFAULT_GAMMAS.to_vec());
            s.repeats.get_or_insert(50);
        }
    }
}

fn build_spec(s: &Settings, errors: &mut Vec<String>) -> Option<ProblemSpec> {
    let spec = ProblemSpec::new(s.loss?, s.reg?, s.lambda?);
    match spec {
        Ok(spec) => Some(spec.with_iterate_bound(s.iterate_bound)),
        Err(e) => {
            errors.push(e.to_string());
            None
        }
    }
}

fn load_dataset(s: &Settings, errors: &mut Vec<String>) -> Result<Option<Dataset>, Failure> {
    let source = s.dataset.as_deref().unwrap_or("synthetic");
    if s.is_synthetic() {
        let cfg = s.synthetic.unwrap_or_default();
        return match generate_synthetic(&cfg) {
            Ok(data) => Ok(Some(data)),
            Err(e) => {
                errors.push(e.to_string());
                Ok(None)
            }
        };
    }
    let path = Path::new(source);
    if !path.is_file() {
        errors.push(format!("dataset file {} does not exist", path.display()));
        return Ok(None);
    }
    let opts = LibsvmOptions::new(s.labels.unwrap_or_default());
    read_libsvm(path, opts).map(Some).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn schedule_of(s: &Settings, errors: &mut Vec<String>) -> Option<StepSchedule> {
    let schedule = match (s.schedule, s.gamma) {
        (Some(_), Some(_)) if s.schedule != s.gamma.map(StepSchedule::constant) => {
            errors.push("set either gamma or schedule, not both".into());
            return None;
        }
        (Some(schedule), _) => schedule,
        (None, Some(gamma)) => StepSchedule::constant(gamma),
        (None, None) => {
            errors.push("a step size is required".into());
            return None;
        }
    };
    match schedule.validate() {
        Ok(()) => Some(schedule),
        Err(e) => {
            errors.push(e.to_string());
            None
        }
    }
}

fn mabs_params(s: &Settings) -> MabsParams {
    MabsParams { eta: s.eta_or_default(), delta_scale: s.t_scale.unwrap_or(1.0), reset_bin: s.reset_bin }
}

fn check_common(s: &Settings, errors: &mut Vec<String>) {
    if s.repeats == Some(0) {
        errors.push("repeats must be at least 1".into());
    }
    if s.stride == Some(0) {
        errors.push("stride must be at least 1".into());
    }
    if s.threads == Some(0) {
        errors.push("threads must be at least 1".into());
    }
    let eta = s.eta_or_default();
    if !(eta > 0.0 && eta < 0.5) {
        errors.push(format!("eta must lie in (0, 0.5), got {eta}"));
    }
    let c = s.t_scale.unwrap_or(1.0);
    if !(c >= 1.0 && c.is_finite()) {
        errors.push(format!("t-scale must be >= 1, got {c}"));
    }
    if s.reset_bin == Some(0) {
        errors.push("reset-bin must be positive".into());
    }
}

/// Prints a line to stdout; a closed pipe is not an error.
fn emit(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn fail_if_any(errors: Vec<String>) -> Result<(), Failure> {
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::Config(errors))
    }
}

fn echo(s: &Settings) -> serde_json::Value {
    serde_json::to_value(s).expect("settings serialize to JSON")
}

fn in_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Failure::Config(vec![format!("thread pool: {e}")]))?;
    Ok(pool.install(job))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn run(mut s: Settings) -> Result<(), Failure> {
    fill_problem(&mut s, Protocol::Run);
    let mut errors = Vec::new();
    let spec = build_spec(&s, &mut errors);
    let data = load_dataset(&s, &mut errors)?;
    if let Some(data) = &data {
        s.iterations.get_or_insert(30 * data.len());
    }
    let schedule = schedule_of(&s, &mut errors);
    check_common(&s, &mut errors);
    fail_if_any(errors)?;
    let (spec, data, schedule) = (spec.unwrap(), data.unwrap(), schedule.unwrap());

    let method = s.estimator.unwrap_or(Method::Sgd);
    let sampler = s.sampler.unwrap_or(SamplerKind::Uniform);
    let mut cfg = RunConfig::new(method, sampler, schedule, s.iterations.unwrap(), 0);
    cfg.sampler = SamplerConfig {
        kind: sampler,
        params: mabs_params(&s),
        bound_source: s.bound_source.unwrap_or_default(),
        horizon: s.horizon,
    };
    cfg.trace = TraceOptions { stride: s.stride, ..TraceOptions::default() };
    let (repeats, seed) = (s.repeats.unwrap_or(1), s.seed.unwrap_or(0));
    let traces = in_pool(s.threads, || run_repeats(&spec, &data, &cfg, repeats, seed))??;

    let out = s.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    create_dir(&out)?;
    let width = repeats.saturating_sub(1).to_string().len().max(3);
    for (k, trace) in traces.iter().enumerate() {
        write_trace_file(trace, out.join(format!("trace_{k:0width$}.csv")))?;
    }
    let label = format!("{}_{}", method.table_name(), sampler.suffix());
    let summary = summarize(&label, echo(&s), &traces, seed);
    write_summary_file(&summary, out.join("summary.json"))?;
    let agg = &summary.aggregate;
    emit(&format!(
        "{label}: {} repeats, {} diverged, mean final F {}, mean final V_e {}",
        agg.repeats,
        agg.diverged,
        format_float(agg.mean_final_objective),
        format_float(agg.mean_final_effective_variance)
    ));
    Ok(())
}

#[derive(Serialize)]
struct SweepReport<'a, R> {
    schema_version: u32,
    config: serde_json::Value,
    rows: &'a [R],
}

pub fn tau_sweep(mut s: Settings) -> Result<(), Failure> {
    fill_problem(&mut s, Protocol::Tau);
    let mut errors = Vec::new();
    if !s.is_synthetic() {
        errors.push("tau-sweep needs the synthetic dataset".into());
    }
    let spec = build_spec(&s, &mut errors);
    let schedule = schedule_of(&s, &mut errors);
    check_common(&s, &mut errors);
    let taus = s.taus.clone().unwrap_or_default();
    if taus.is_empty() {
        errors.push("tau grid is empty".into());
    }
    let synthetic = s.synthetic.unwrap_or_default();
    if let Err(e) = synthetic.validate() {
        errors.push(e.to_string());
    }
    for &tau in &taus {
        if !(tau >= 1.0 && tau < synthetic.n as f64) {
            errors.push(format!("tau {tau} is outside [1, n)"));
        }
    }
    fail_if_any(errors)?;

    let mut cfg = TauSweepConfig::standard(taus).map_err(Failure::from)?;
    cfg.synthetic = synthetic;
    cfg.spec = spec.unwrap();
    cfg.schedule = schedule.unwrap();
    cfg.settings = sweep_settings(&s);
    let rows = in_pool(s.threads, || sweep_tau(&cfg))??;

    let out = s.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    create_dir(&out)?;
    write_text(&out.join("tau_sweep.csv"), &tau_csv(&rows))?;
    write_json(&out.join("tau_sweep.json"), &SweepReport { schema_version: 1, config: echo(&s), rows: &rows })?;
    for r in &rows {
        emit(&format!(
            "tau={} {}: gap {} V_e {} diverged {}/{}",
            format_float(r.tau),
            r.label,
            format_float(r.mean_gap),
            format_float(r.mean_effective_variance),
            r.diverged,
            r.repeats
        ));
    }
    Ok(())
}

fn sweep_settings(s: &Settings) -> SweepSettings {
    SweepSettings {
        method: s.estimator.unwrap_or(Method::Sgd),
        samplers: s.samplers.clone().unwrap_or_default(),
        params: mabs_params(s),
        bound_source: s.bound_source.unwrap_or_default(),
        iterations: s.iterations.unwrap_or(0),
        repeats: s.repeats.unwrap_or(1),
        seed: s.seed.unwrap_or(0),
        stride: s.stride,
    }
}

fn tau_csv(rows: &[TauRow]) -> String {
    let mut text = String::from(
        "tau_target,tau,scale_c,sampler,label,optimum,mean_gap,std_gap,mean_effective_variance,\
         std_effective_variance,diverged,repeats\n",
    );
    for r in rows {
        let f = format_float;
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            f(r.tau_target),
            f(r.tau),
            f(r.scale_c),
            r.sampler.label(),
            r.label,
            f(r.optimum),
            f(r.mean_gap),
            f(r.std_gap),
            f(r.mean_effective_variance),
            f(r.std_effective_variance),
            r.diverged,
            r.repeats
        );
    }
    text
}

pub fn stability_sweep(mut s: Settings) -> Result<(), Failure> {
    fill_problem(&mut s, Protocol::Stability);
    let mut errors = Vec::new();
    if s.schedule.is_some() {
        errors.push("stability-sweep uses constant steps from the gamma grid; drop schedule".into());
    }
    let spec = build_spec(&s, &mut errors);
    let data = load_dataset(&s, &mut errors)?;
    if let Some(data) = &data {
        s.iterations.get_or_insert(60 * data.len());
    }
    check_common(&s, &mut errors);
    let gammas = s.gammas.clone().unwrap_or_default();
    if gammas.is_empty() {
        errors.push("gamma grid is empty".into());
    }
    for &g in &gammas {
        if !(g > 0.0 && g.is_finite()) {
            errors.push(format!("gamma {g} is not a positive finite step"));
        }
    }
    if s.samplers.as_ref().is_some_and(|v| v.is_empty()) {
        errors.push("at least one sampler is required".into());
    }
    fail_if_any(errors)?;
    // The gamma grid replaces the single step size.
    s.gamma = None;

    let cfg = StabilityConfig { spec: spec.unwrap(), gammas, settings: sweep_settings(&s) };
    let data = data.unwrap();
    let rows = in_pool(s.threads, || sweep_stability(&cfg, &data))??;

    let out = s.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    create_dir(&out)?;
    write_text(&out.join("stability_sweep.csv"), &stability_csv(&rows))?;
    write_json(&out.join("stability_sweep.json"), &SweepReport { schema_version: 1, config: echo(&s), rows: &rows })?;
    for r in &rows {
        emit(&format!(
            "gamma={} {}: mean final F {} diverged {}/{}",
            format_float(r.gamma),
            r.label,
            format_float(r.mean_final_objective),
            r.diverged,
            r.repeats
        ));
    }
    Ok(())
}

fn stability_csv(rows: &[StabilityRow]) -> String {
    let mut text = String::from(
        "gamma,sampler,estimator,label,mean_final_objective,std_final_objective,initial_objective,non_finite,\
         diverged,repeats,divergence_fraction\n",
    );
    for r in rows {
        let f = format_float;
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{}",
            f(r.gamma),
            r.sampler.label(),
            r.method.label(),
            r.label,
            f(r.mean_final_objective),
            f(r.std_final_objective),
            f(r.initial_objective),
            r.non_finite,
            r.diverged,
            r.repeats,
            f(r.divergence_fraction())
        );
    }
    text
}

pub fn verify(names: &[String], seed: u64) -> Result<(), Failure> {
    let suites: Vec<Suite> = if names.is_empty() || names.iter().any(|n| n == "all") {
        Suite::ALL.to_vec()
    } else {
        let parsed: Vec<Result<Suite, _>> = names.iter().map(|n| n.parse::<Suite>()).collect();
        let errors: Vec<String> = parsed.iter().filter_map(|r| r.as_ref().err().map(|e| e.to_string())).collect();
        fail_if_any(errors)?;
        parsed.into_iter().map(Result::unwrap).collect()
    };
    let mut reports = Vec::new();
    for suite in suites {
        reports.push(suite.run(seed)?);
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.suite.as_str()).collect();
    let json = serde_json::json!({ "passed": failed.is_empty(), "reports": reports });
    emit(&serde_json::to_string_pretty(&json).map_err(|e| Failure::Io(e.to_string()))?);
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(failed.join(", ")))
    }
}

pub fn parse_check(path: &Path, regression: bool) -> Result<(), Failure> {
    let labels = if regression { LabelMode::Regression } else { LabelMode::Classification };
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let data: Dataset = mabs_core::io::parse_libsvm_str(&text, LibsvmOptions::new(labels))
        .map_err(|e| Failure::Verification(format!("{}: {e}", path.display())))?;
    let nnz: usize = data.points().iter().map(|p| p.features.nnz()).sum();
    let positives = data.points().iter().filter(|p| p.label > 0.0).count();
    let json = serde_json::json!({
        "path": path.display().to_string(),
        "points": data.len(),
        "dim": data.dim(),
        "nonzeros": nnz,
        "positive_labels": positives,
    });
    emit(&serde_json::to_string_pretty(&json).map_err(|e| Failure::Io(e.to_string()))?);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_dataset() {
        let mut s = Settings::default();
        fill_problem(&mut s, Protocol::Run);
        assert_eq!((s.loss, s.gamma), (Some(Loss::Ridge), Some(4e-3)));
        let mut s =
            Settings { dataset: Some("w8a.txt".into()), estimator: Some(Method::ProxSvrg), ..Default::default() };
        fill_problem(&mut s, Protocol::Stability);
        assert_eq!((s.loss, s.reg, s.gamma), (Some(Loss::Logistic), Some(Regularizer::L1), Some(2.0)));
        assert_eq!(s.labels, Some(LabelMode::Classification));
    }

    #[test]
    fn errors_are_collected_together() {
        let mut s = Settings {
            dataset: Some("/nonexistent/file".into()),
            lambda: Some(-1.0),
            eta: Some(0.7),
            repeats: Some(0),
            ..Default::default()
        };
        fill_problem(&mut s, Protocol::Run);
        let mut errors = Vec::new();
        build_spec(&s, &mut errors);
        load_dataset(&s, &mut errors).unwrap();
        check_common(&s, &mut errors);
        assert!(errors.len() >= 4, "{errors:?}");
    }
}
