//! Tabular output. CSV and JSON carry identical field names, and output is
//! byte-stable for fixed inputs.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

/// One (configuration, estimator) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub n: u64,
    pub lambda: f64,
    pub delta: Option<f64>,
    pub trials: u64,
    pub point: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound: Option<f64>,
    pub verdict: Option<Verdict>,
}

/// One point of the chain/CORE cutoff curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffRow {
    pub one_minus_p: f64,
    pub p: f64,
    pub cutoff_n: u64,
}

pub trait Row: Serialize {
    const HEADER: &'static [&'static str];
}

impl Row for ReportRow {
    const HEADER: &'static [&'static str] = &[
        "name", "n", "lambda", "delta", "trials", "point", "stderr", "ci_low", "ci_high", "bound", "verdict",
    ];
}

impl Row for CutoffRow {
    const HEADER: &'static [&'static str] = &["one_minus_p", "p", "cutoff_n"];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

pub fn any_failed(rows: &[ReportRow]) -> bool {
    rows.iter().any(|r| r.verdict == Some(Verdict::Fail))
}

/// Header line always, then one line per row.
pub fn write_csv<R: Row, W: Write>(rows: &[R], out: W) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(R::HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
}

/// Pretty-printed JSON array followed by a newline.
pub fn write_json<R: Row, W: Write>(rows: &[R], mut out: W) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    writeln!(out)
}

pub fn write_rows<R: Row, W: Write>(rows: &[R], format: Format, out: W) -> io::Result<()> {
    match format {
        Format::Csv => write_csv(rows, out),
        Format::Json => write_json(rows, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ReportRow {
        ReportRow {
            name: "core.correctness".into(),
            n: 99,
            lambda: 1.0,
            delta: Some(11.502),
            trials: 1000,
            point: 0.999,
            stderr: 0.000_999_5,
            ci_low: 0.994,
            ci_high: 0.9998,
            bound: Some(0.9989),
            verdict: Some(Verdict::Pass),
        }
    }

    fn csv_of(rows: &[ReportRow]) -> String {
        let mut buf = Vec::new();
        write_csv(rows, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_report_is_header_only() {
        assert_eq!(csv_of(&[]), "name,n,lambda,delta,trials,point,stderr,ci_low,ci_high,bound,verdict\n");
    }

    #[test]
    fn serialization_is_byte_stable() {
        let a = csv_of(&[row()]);
        assert_eq!(a, csv_of(&[row()]));
        assert!(a.ends_with("core.correctness,99,1.0,11.502,1000,0.999,0.0009995,0.994,0.9998,0.9989,PASS\n"), "{a}");
    }

    #[test]
    fn missing_bound_is_an_empty_field() {
        let r = ReportRow {
            delta: None,
            bound: None,
            verdict: None,
            ..row()
        };
        assert!(csv_of(&[r]).lines().nth(1).unwrap().ends_with(",,"));
    }

    #[test]
    fn json_round_trip() {
        let mut buf = Vec::new();
        write_json(&[row()], &mut buf).unwrap();
        let back: Vec<ReportRow> = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, vec![row()]);
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let keys: Vec<&str> = v[0].as_object().unwrap().keys().map(|k| k.as_str()).collect();
        let mut expected = ReportRow::HEADER.to_vec();
        expected.sort();
        let mut got = keys.clone();
        got.sort();
        assert_eq!(got, expected);
    }
}
