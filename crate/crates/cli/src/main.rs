//! `mabs`: experiment harness for bandit-sampled stochastic optimization.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Settings;

#[derive(Debug, Parser)]
#[command(name = "mabs", version, about = "Bandit datapoint sampling for stochastic optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run repeats of one (estimator, sampler) pair and write traces plus a summary
    Run(ExperimentArgs),
    /// Sweep the smoothness ratio τ on synthetic regression data
    TauSweep(ExperimentArgs),
    /// Sweep constant step sizes and report divergence per sampler
    StabilitySweep(ExperimentArgs),
    /// Run the property suites and print a JSON report
    Verify {
        /// Suite to run (repeatable); all suites when absent
        #[arg(long = "suite")]
        suites: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Validate a LIBSVM file and print its shape
    ParseCheck {
        path: PathBuf,
        /// Keep labels as they are instead of mapping them to ±1
        #[arg(long)]
        regression: bool,
    },
}

#[derive(Debug, clap::Args)]
struct ExperimentArgs {
    /// TOML file with the same keys as the flags; flags win
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

impl ExperimentArgs {
    fn resolve(self) -> Result<Settings, Failure> {
        let base = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        Ok(base.overlay(self.settings))
    }
}

/// Reason for a nonzero exit.
#[derive(Debug)]
pub enum Failure {
    Config(Vec<String>),
    Verification(String),
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Verification(_) => 3,
            Failure::Io(_) => 4,
        }
    }
}

impl From<mabs_core::Error> for Failure {
    fn from(e: mabs_core::Error) -> Self {
        use mabs_core::Error as E;
        match e {
            E::Io(_) | E::Csv(_) | E::Json(_) | E::Parse { .. } | E::SchemaVersion { .. } => Failure::Io(e.to_string()),
            other => Failure::Config(vec![other.to_string()]),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(errors) => {
                write!(f, "configuration error")?;
                for e in errors {
                    write!(f, "\n  - {e}")?;
                }
                Ok(())
            }
            Failure::Verification(msg) => write!(f, "verification failed: {msg}"),
            Failure::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => args.resolve().and_then(commands::run),
        Command::TauSweep(args) => args.resolve().and_then(commands::tau_sweep),
        Command::StabilitySweep(args) => args.resolve().and_then(commands::stability_sweep),
        Command::Verify { suites, seed } => commands::verify(&suites, seed),
        Command::ParseCheck { path, regression } => commands::parse_check(&path, regression),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
