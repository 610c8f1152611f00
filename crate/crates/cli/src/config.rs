//! Experiment configuration: a TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use mabs_core::io::{LabelMode, SyntheticConfig};
use mabs_core::model::{Loss, Regularizer};
use mabs_core::optimize::{BoundSource, Method, StepSchedule};
use mabs_core::sampling::{SamplerKind, DEFAULT_ETA};
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Every setting, each optional so that the file and the flags can be merged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// `synthetic` or a LIBSVM file path
    #[arg(long)]
    pub dataset: Option<String>,
    /// Label handling for LIBSVM input [default: regression for ridge, classification otherwise]
    #[arg(long, value_parser = parse_labels)]
    pub labels: Option<LabelMode>,
    /// Synthetic generator settings (file only)
    #[arg(skip)]
    pub synthetic: Option<SyntheticConfig>,
    /// logistic, squared-hinge or ridge
    #[arg(long, value_parser = parse_loss)]
    pub loss: Option<Loss>,
    /// l1, l2 or none
    #[arg(long, value_parser = parse_reg)]
    pub reg: Option<Regularizer>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Bound on ‖w‖ used for worst-case gradient bounds
    #[arg(long)]
    pub iterate_bound: Option<f64>,
    /// sgd, prox-sgd, prox-svrg or saga
    #[arg(long, value_parser = parse_method)]
    pub estimator: Option<Method>,
    /// uniform, is-smoothness, is-bound, mabs or mabs2
    #[arg(long, value_parser = parse_sampler)]
    pub sampler: Option<SamplerKind>,
    /// Samplers compared by the sweeps (comma separated)
    #[arg(long, value_delimiter = ',', value_parser = parse_sampler)]
    pub samplers: Option<Vec<SamplerKind>>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Divide the bandit step δ by c
    #[arg(long = "t-scale")]
    pub t_scale: Option<f64>,
    /// Reset bandit weights every N updates
    #[arg(long = "reset-bin")]
    pub reset_bin: Option<usize>,
    /// initial-gradient or gradient-bound
    #[arg(long, value_parser = parse_bound)]
    pub bound_source: Option<BoundSource>,
    /// Horizon used to derive δ [default: T]
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Constant step size
    #[arg(long)]
    pub gamma: Option<f64>,
    /// constant:G, inverse-strong:MU or shifted:ALPHA:MU
    #[arg(long, value_parser = parse_schedule)]
    pub schedule: Option<StepSchedule>,
    /// Iterations per repeat
    #[arg(long = "T")]
    #[serde(rename = "T", alias = "iterations")]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Checkpoint every N iterations [default: n]
    #[arg(long)]
    pub stride: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for repeats [default: all cores]
    #[arg(long)]
    pub threads: Option<usize>,
    /// τ grid of the τ sweep (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    /// γ grid of the stability sweep (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),*) => {
        Settings { $($field: $top.$field.or($base.$field)),* }
    };
}

impl Settings {
    pub fn load(path: &Path) -> Result<Settings, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Config(vec![format!("{}: {e}", path.display())]))
    }

    /// `self` with every field set in `top` replaced by `top`'s value.
    /// A step size from either `gamma` or `schedule` in `top` replaces both in `self`.
    pub fn overlay(self, top: Settings) -> Settings {
        let mut base = self;
        if top.gamma.is_some() || top.schedule.is_some() {
            base.gamma = None;
            base.schedule = None;
        }
        overlay!(base, top; dataset, labels, synthetic, loss, reg, lambda, iterate_bound, estimator, sampler,
            samplers, eta, t_scale, reset_bin, bound_source, horizon, gamma, schedule, iterations, repeats, seed,
            stride, out, threads, taus, gammas)
    }

    pub fn is_synthetic(&self) -> bool {
        self.dataset.as_deref().is_none_or(|d| d == "synthetic")
    }

    pub fn eta_or_default(&self) -> f64 {
        self.eta.unwrap_or(DEFAULT_ETA)
    }
}

fn parse_labels(s: &str) -> Result<LabelMode, String> {
    match s {
        "classification" => Ok(LabelMode::Classification),
        "regression" => Ok(LabelMode::Regression),
        other => Err(format!("unknown label mode '{other}'")),
    }
}

fn parse_loss(s: &str) -> Result<Loss, String> {
    match s {
        "logistic" => Ok(Loss::Logistic),
        "squared-hinge" => Ok(Loss::SquaredHinge),
        "ridge" => Ok(Loss::Ridge),
        other => Err(format!("unknown loss '{other}'")),
    }
}

fn parse_reg(s: &str) -> Result<Regularizer, String> {
    match s {
        "l1" => Ok(Regularizer::L1),
        "l2" => Ok(Regularizer::L2),
        "none" => Ok(Regularizer::None),
        other => Err(format!("unknown regularizer '{other}'")),
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: mabs_core::Error| e.to_string())
}

fn parse_sampler(s: &str) -> Result<SamplerKind, String> {
    s.parse().map_err(|e: mabs_core::Error| e.to_string())
}

fn parse_bound(s: &str) -> Result<BoundSource, String> {
    s.parse().map_err(|e: mabs_core::Error| e.to_string())
}

fn parse_schedule(s: &str) -> Result<StepSchedule, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |v: &str| v.parse::<f64>().map_err(|e| format!("bad number '{v}' in schedule: {e}"));
    match parts.as_slice() {
        ["constant", g] => Ok(StepSchedule::Constant { gamma: num(g)? }),
        ["inverse-strong", mu] => Ok(StepSchedule::InverseStrong { mu: num(mu)? }),
        ["shifted", alpha, mu] => Ok(StepSchedule::Shifted { alpha: num(alpha)?, mu: num(mu)? }),
        _ => Err(format!("schedule '{s}' is not constant:G, inverse-strong:MU or shifted:ALPHA:MU")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file: Settings = toml::from_str("loss = \"ridge\"\nT = 10\nseed = 4\n").unwrap();
        let flags = Settings { iterations: Some(20), ..Default::default() };
        let merged = file.overlay(flags);
        assert_eq!(merged.iterations, Some(20));
        assert_eq!(merged.seed, Some(4));
        assert_eq!(merged.loss, Some(Loss::Ridge));
        let file: Settings = toml::from_str("gamma = 0.5").unwrap();
        let flags = Settings { schedule: Some(StepSchedule::InverseStrong { mu: 1.0 }), ..Default::default() };
        let merged = file.overlay(flags);
        assert_eq!((merged.gamma, merged.schedule), (None, Some(StepSchedule::InverseStrong { mu: 1.0 })));
    }

    #[test]
    fn file_accepts_nested_tables() {
        let text = "dataset = \"synthetic\"\nsamplers = [\"uniform\", \"mabs\"]\n\
                    [synthetic]\nn = 20\nseed = 3\n[schedule]\nkind = \"shifted\"\nalpha = 1.0\nmu = 0.5\n";
        let s: Settings = toml::from_str(text).unwrap();
        assert_eq!(s.synthetic.unwrap().n, 20);
        assert_eq!(s.synthetic.unwrap().d, 5);
        assert_eq!(s.schedule, Some(StepSchedule::Shifted { alpha: 1.0, mu: 0.5 }));
        assert_eq!(s.samplers.unwrap().len(), 2);
        assert!(toml::from_str::<Settings>("unknown = 1").is_err());
    }

    #[test]
    fn schedule_strings() {
        assert_eq!(parse_schedule("constant:0.5").unwrap(), StepSchedule::Constant { gamma: 0.5 });
        assert_eq!(parse_schedule("inverse-strong:2").unwrap(), StepSchedule::InverseStrong { mu: 2.0 });
        assert!(parse_schedule("constant").is_err());
        assert!(parse_schedule("linear:1").is_err());
    }
}
