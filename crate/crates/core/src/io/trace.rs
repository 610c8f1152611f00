//! Per-repeat trace CSV.
//!
//! ```text
//! # schema_version=1
//! t,i,p_i,a_it,F,Ve,Vpseudo
//! 0,,,,<F>,<Ve>,<V>
//! 1,<i>,<p_i>,<a_it>,,,
//! ...
//! # final_iterate=<w_1>;<w_2>;...
//! # average_iterate=<...>
//! # diverged=false
//! ```
//!
//! Row `t` carries the draw of iteration `t` and, on checkpoint rows, the
//! objective and variances of the state reached after that iteration. Numbers
//! are written with 17 significant digits.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::optimize::{Checkpoint, RunTrace, StepRecord};
use crate::scalar::Scalar;

pub const TRACE_SCHEMA_VERSION: u32 = 1;
pub const TRACE_COLUMNS: [&str; 7] = ["t", "i", "p_i", "a_it", "F", "Ve", "Vpseudo"];

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_vector<S: Scalar>(w: &[S]) -> String {
    w.iter().map(|v| format_float(v.as_f64())).collect::<Vec<_>>().join(";")
}

pub fn write_trace<S: Scalar, W: Write>(trace: &RunTrace<S>, mut out: W) -> Result<()> {
    writeln!(out, "# schema_version={TRACE_SCHEMA_VERSION}")?;
    {
        let mut csv = csv::Writer::from_writer(&mut out);
        csv.write_record(TRACE_COLUMNS)?;
        let checkpoints: BTreeMap<usize, &Checkpoint> = trace.checkpoints.iter().map(|c| (c.t, c)).collect();
        let last = trace.steps.len().max(checkpoints.keys().next_back().copied().unwrap_or(0));
        let empty = || String::new();
        for t in 0..=last {
            let step = t.checked_sub(1).and_then(|k| trace.steps.get(k));
            let cp = checkpoints.get(&t);
            if step.is_none() && cp.is_none() {
                continue;
            }
            let (i, p, a) = match step {
                Some(s) => (s.index.to_string(), format_float(s.probability.as_f64()), format_float(s.reward.as_f64())),
                None => (empty(), empty(), empty()),
            };
            let (f, ve, vp) = match cp {
                Some(c) => {
                    (format_float(c.objective), format_float(c.effective_variance), format_float(c.pseudo_variance))
                }
                None => (empty(), empty(), empty()),
            };
            csv.write_record([t.to_string(), i, p, a, f, ve, vp])?;
        }
        csv.flush()?;
    }
    writeln!(out, "# final_iterate={}", format_vector(&trace.final_iterate))?;
    writeln!(out, "# average_iterate={}", format_vector(&trace.average_iterate))?;
    writeln!(out, "# diverged={}", trace.diverged)?;
    Ok(())
}

pub fn write_trace_file<S: Scalar>(trace: &RunTrace<S>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_trace(trace, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace`]. Verification history and stored
/// iterates are not part of the file and come back as `None`.
pub fn read_trace<S: Scalar, R: Read>(input: R) -> Result<RunTrace<S>> {
    let mut lines = BufReader::new(input).lines();
    let first = lines.next().transpose()?.unwrap_or_default();
    let version = first.trim().strip_prefix("# schema_version=").map(str::trim);
    match version {
        Some(v) if v == TRACE_SCHEMA_VERSION.to_string() => {}
        Some(v) => return Err(Error::SchemaVersion { expected: TRACE_SCHEMA_VERSION, found: v.to_string() }),
        None => return Err(Error::SchemaVersion { expected: TRACE_SCHEMA_VERSION, found: "missing".into() }),
    }
    let mut body = String::new();
    let mut meta = BTreeMap::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if let Some(c) = line.strip_prefix('#') {
            let (key, value) = c
                .trim()
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: k + 2, message: format!("malformed metadata '{line}'") })?;
            meta.insert(key.to_string(), value.to_string());
        } else {
            body.push_str(&line);
            body.push('\n');
        }
    }

    let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    if reader.headers()?.iter().ne(TRACE_COLUMNS) {
        return Err(Error::Parse { line: 2, message: "unexpected trace columns".into() });
    }
    let mut steps = Vec::new();
    let mut checkpoints = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = k + 3;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let t: usize = parse_num(field(0), line)?;
        if !field(1).is_empty() {
            steps.push(StepRecord {
                t,
                index: parse_num(field(1), line)?,
                probability: S::of(parse_num(field(2), line)?),
                reward: S::of(parse_num(field(3), line)?),
            });
        }
        if !field(4).is_empty() {
            checkpoints.push(Checkpoint {
                t,
                objective: parse_num(field(4), line)?,
                effective_variance: parse_num(field(5), line)?,
                pseudo_variance: parse_num(field(6), line)?,
            });
        }
    }
    let vector = |key: &str| -> Result<Vec<S>> {
        let raw =
            meta.get(key).ok_or_else(|| Error::Parse { line: 0, message: format!("missing '{key}' metadata") })?;
        raw.split(';').filter(|s| !s.is_empty()).map(|s| parse_num::<f64>(s, 0).map(S::of)).collect()
    };
    let diverged = match meta.get("diverged").map(String::as_str) {
        Some("true") => true,
        Some("false") => false,
        _ => return Err(Error::Parse { line: 0, message: "missing or malformed 'diverged' metadata".into() }),
    };
    Ok(RunTrace {
        steps,
        checkpoints,
        final_iterate: vector("final_iterate")?,
        average_iterate: vector("average_iterate")?,
        diverged,
        history: None,
        iterates: None,
    })
}

pub fn read_trace_file<S: Scalar>(path: impl AsRef<Path>) -> Result<RunTrace<S>> {
    read_trace(File::open(path)?)
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse { line, message: format!("malformed number '{s}'") })
}
