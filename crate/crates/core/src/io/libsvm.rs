//! LIBSVM text format: `<label> <idx>:<val> ...` with 1-based, strictly
//! increasing feature indices. `#` starts a comment.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DataPoint, Dataset, SparseVec};
use crate::scalar::Scalar;

/// How labels are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelMode {
    /// `+1 → +1`, `-1` and `0 → -1`; anything else is rejected.
    #[default]
    Classification,
    /// Labels are kept as they are.
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LibsvmOptions {
    pub labels: LabelMode,
    /// Feature dimension; inferred from the largest index when absent.
    pub dim: Option<usize>,
}

impl LibsvmOptions {
    pub fn new(labels: LabelMode) -> Self {
        LibsvmOptions { labels, dim: None }
    }
}

pub fn parse_libsvm<S: Scalar, R: BufRead>(reader: R, opts: LibsvmOptions) -> Result<Dataset<S>> {
    let mut points = Vec::new();
    let mut max_dim = 0usize;
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let point = parse_line(body, line_no, opts.labels)?;
        max_dim = max_dim.max(point.features.min_dim());
        points.push(point);
    }
    if points.is_empty() {
        return Err(Error::Parse { line: 0, message: "no datapoints found".into() });
    }
    let dim = match opts.dim {
        Some(d) if d < max_dim => {
            return Err(Error::config(format!("dimension override {d} is below the largest feature index {max_dim}")))
        }
        Some(d) => d,
        None => max_dim.max(1),
    };
    Dataset::new(points, dim)
}

pub fn parse_libsvm_str<S: Scalar>(text: &str, opts: LibsvmOptions) -> Result<Dataset<S>> {
    parse_libsvm(text.as_bytes(), opts)
}

pub fn read_libsvm<S: Scalar>(path: impl AsRef<Path>, opts: LibsvmOptions) -> Result<Dataset<S>> {
    parse_libsvm(BufReader::new(File::open(path)?), opts)
}

fn parse_line<S: Scalar>(body: &str, line: usize, labels: LabelMode) -> Result<DataPoint<S>> {
    let err = |message: String| Error::Parse { line, message };
    let mut tokens = body.split_whitespace();
    let label_tok = tokens.next().ok_or_else(|| err("missing label".into()))?;
    let raw: f64 = label_tok.parse().map_err(|_| err(format!("malformed label '{label_tok}'")))?;
    let label = match labels {
        LabelMode::Classification if raw == 1.0 => 1.0,
        LabelMode::Classification if raw == -1.0 || raw == 0.0 => -1.0,
        LabelMode::Classification => {
            return Err(err(format!("classification label must be +1, -1 or 0, got {label_tok}")))
        }
        LabelMode::Regression if raw.is_finite() => raw,
        LabelMode::Regression => return Err(err(format!("label '{label_tok}' is not finite"))),
    };
    let mut pairs = Vec::new();
    let mut last = 0usize;
    for tok in tokens {
        let (idx, val) = tok.split_once(':').ok_or_else(|| err(format!("malformed feature '{tok}'")))?;
        let idx: usize = idx.parse().map_err(|_| err(format!("malformed feature index in '{tok}'")))?;
        if idx == 0 {
            return Err(err(format!("feature indices are 1-based, got '{tok}'")));
        }
        if idx <= last {
            return Err(err(format!("feature indices must be strictly increasing ({idx} after {last})")));
        }
        last = idx;
        let val: f64 = val.parse().map_err(|_| err(format!("malformed feature value in '{tok}'")))?;
        if !val.is_finite() {
            return Err(err(format!("feature value in '{tok}' is not finite")));
        }
        pairs.push((idx - 1, S::of(val)));
    }
    let features = SparseVec::from_pairs(pairs).map_err(|e| err(e.to_string()))?;
    Ok(DataPoint::new(features, S::of(label)))
}

/// Canonical writer: shortest round-trip numbers, one point per line.
pub fn write_libsvm<S: Scalar, W: Write>(data: &Dataset<S>, mut out: W) -> Result<()> {
    for p in data.points() {
        write!(out, "{}", p.label)?;
        for (j, v) in p.features.iter() {
            write!(out, " {}:{}", j + 1, v)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_format_example() {
        let d: Dataset = parse_libsvm_str("+1 1:0.5 3:2\n", LibsvmOptions::default()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.dim(), 3);
        let p = d.point(0);
        assert_eq!(p.label, 1.0);
        assert_eq!(p.features.indices(), &[0, 2]);
        assert_eq!(p.features.values(), &[0.5, 2.0]);
    }

    #[test]
    fn skips_comments_and_blank_lines() {
        let text = "# header\n\n-1 2:1 # trailing\n   \n0 1:3\n";
        let d: Dataset = parse_libsvm_str(text, LibsvmOptions::default()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.point(0).label, -1.0);
        assert_eq!(d.point(1).label, -1.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = ["1 1:1\n1 2:1 2:3\n", "1 1:1\n\n1 x:2\n", "1 1:1\n2 1:1\n", "1 0:1\n", "1 1:abc\n"];
        let lines = [2, 3, 2, 1, 1];
        for (text, line) in cases.iter().zip(lines) {
            match parse_libsvm_str::<f64>(text, LibsvmOptions::default()) {
                Err(Error::Parse { line: got, .. }) => assert_eq!(got, line, "{text:?}"),
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn regression_labels_pass_through() {
        let d: Dataset = parse_libsvm_str("2.5 1:1\n-7 2:1\n", LibsvmOptions::new(LabelMode::Regression)).unwrap();
        assert_eq!(d.point(0).label, 2.5);
        assert_eq!(d.point(1).label, -7.0);
    }

    #[test]
    fn dimension_override() {
        let opts = LibsvmOptions { dim: Some(10), ..Default::default() };
        assert_eq!(parse_libsvm_str::<f64>("1 3:1\n", opts).unwrap().dim(), 10);
        let opts = LibsvmOptions { dim: Some(2), ..Default::default() };
        assert!(parse_libsvm_str::<f64>("1 3:1\n", opts).is_err());
    }

    #[test]
    fn writer_round_trips() {
        let text = "1 1:0.1 4:-3.25e-7\n-1 2:1e300\n1\n";
        let d: Dataset = parse_libsvm_str(text, LibsvmOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_libsvm(&d, &mut buf).unwrap();
        let opts = LibsvmOptions { dim: Some(d.dim()), ..Default::default() };
        let back: Dataset = parse_libsvm(buf.as_slice(), opts).unwrap();
        assert_eq!(back, d);
    }
}
