//! Aggregate summary of repeated runs, stored as JSON.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::mean_and_std;
use crate::optimize::RunTrace;
use crate::scalar::Scalar;

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// Outcome of one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub repeat: usize,
    pub seed: u64,
    pub iterations: usize,
    pub diverged: bool,
    #[serde(with = "float_repr")]
    pub initial_objective: f64,
    #[serde(with = "float_repr")]
    pub final_objective: f64,
    #[serde(with = "float_repr")]
    pub final_effective_variance: f64,
}

impl RepeatSummary {
    pub fn from_trace<S: Scalar>(repeat: usize, seed: u64, trace: &RunTrace<S>) -> Self {
        RepeatSummary {
            repeat,
            seed,
            iterations: trace.iterations(),
            diverged: trace.diverged,
            initial_objective: trace.initial().map_or(f64::NAN, |c| c.objective),
            final_objective: trace.final_objective(),
            final_effective_variance: trace.final_effective_variance(),
        }
    }
}

/// Means and sample standard deviations over the repeats that did not diverge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub repeats: usize,
    pub diverged: usize,
    #[serde(with = "float_repr")]
    pub mean_final_objective: f64,
    #[serde(with = "float_repr")]
    pub std_final_objective: f64,
    #[serde(with = "float_repr")]
    pub mean_final_effective_variance: f64,
    #[serde(with = "float_repr")]
    pub std_final_effective_variance: f64,
}

impl Aggregate {
    /// Repeats are sorted by index first, so the result does not depend on completion order.
    pub fn from_repeats(repeats: &[RepeatSummary]) -> Self {
        let mut sorted: Vec<&RepeatSummary> = repeats.iter().collect();
        sorted.sort_by_key(|r| r.repeat);
        let kept: Vec<&&RepeatSummary> = sorted.iter().filter(|r| !r.diverged).collect();
        let f: Vec<f64> = kept.iter().map(|r| r.final_objective).collect();
        let v: Vec<f64> = kept.iter().map(|r| r.final_effective_variance).collect();
        let (mut mf, sf) = mean_and_std(&f);
        let (mut mv, sv) = mean_and_std(&v);
        if kept.is_empty() && !repeats.is_empty() {
            mf = f64::INFINITY;
            mv = f64::INFINITY;
        }
        Aggregate {
            repeats: repeats.len(),
            diverged: repeats.len() - kept.len(),
            mean_final_objective: mf,
            std_final_objective: sf,
            mean_final_effective_variance: mv,
            std_final_effective_variance: sv,
        }
    }

    pub fn divergence_fraction(&self) -> f64 {
        if self.repeats == 0 {
            0.0
        } else {
            self.diverged as f64 / self.repeats as f64
        }
    }
}

/// Summary file of one experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub label: String,
    /// Echo of the configuration that produced the runs.
    pub config: serde_json::Value,
    pub repeats: Vec<RepeatSummary>,
    pub aggregate: Aggregate,
}

impl RunSummary {
    pub fn new(label: impl Into<String>, config: serde_json::Value, mut repeats: Vec<RepeatSummary>) -> Self {
        repeats.sort_by_key(|r| r.repeat);
        let aggregate = Aggregate::from_repeats(&repeats);
        RunSummary { schema_version: SUMMARY_SCHEMA_VERSION, label: label.into(), config, repeats, aggregate }
    }
}

pub fn write_summary<W: Write>(summary: &RunSummary, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, summary)?;
    writeln!(out)?;
    Ok(())
}

pub fn write_summary_file(summary: &RunSummary, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_summary(summary, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn read_summary<R: Read>(input: R) -> Result<RunSummary> {
    let value: serde_json::Value = serde_json::from_reader(input)?;
    match value.get("schema_version") {
        Some(v) if v.as_u64() == Some(SUMMARY_SCHEMA_VERSION as u64) => {}
        Some(v) => return Err(Error::SchemaVersion { expected: SUMMARY_SCHEMA_VERSION, found: v.to_string() }),
        None => return Err(Error::SchemaVersion { expected: SUMMARY_SCHEMA_VERSION, found: "missing".into() }),
    }
    Ok(serde_json::from_value(value)?)
}

pub fn read_summary_file(path: impl AsRef<Path>) -> Result<RunSummary> {
    read_summary(File::open(path)?)
}

/// Finite numbers as JSON numbers, the rest as the strings `inf`, `-inf`, `nan`.
pub mod float_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: '{other}'"))),
            },
        }
    }
}
