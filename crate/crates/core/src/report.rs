//! Deterministic output: per-checkpoint CSV tables and JSON summaries.
//!
//! Floats are written with 12 significant digits, rationals as `num/den`.
//! Nothing time- or host-dependent is ever written, so a fixed config and
//! seed reproduce every byte.

use std::io::Write;

use num_rational::BigRational;
use serde::Serialize;
use serde_json::Value;

use crate::arith::PhiTable;
use crate::config::{Config, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::estimate::{MeasureEstimate, Provenance};
use crate::psi::ApproxFunction;
use crate::sampler::GENERATOR_ID;

pub const CSV_HEADER: [&str; 7] = ["q", "phi_q", "psi_q", "measure", "provenance", "ci_low", "ci_high"];

/// Line closing every JSON summary.
pub const DISCLAIMER: &str = "Finite-Q estimates only indicate a trend; they do not establish that a limsup set is null or full.";

/// `v` with 12 significant digits: positional for exponents in `-5..12`,
/// scientific otherwise.
pub fn fmt_float(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let (sign, mantissa) = mantissa.strip_prefix('-').map_or(("", mantissa), |m| ("-", m));
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    if !(-5..12).contains(&exp) {
        return format!("{sign}{}.{}e{exp}", &digits[..1], &digits[1..]);
    }
    if exp < 0 {
        format!("{sign}0.{}{digits}", "0".repeat((-exp - 1) as usize))
    } else {
        let point = exp as usize + 1;
        format!("{sign}{}.{}", &digits[..point], &digits[point..])
    }
}

/// `v` rounded to 12 significant digits.
pub fn round12(v: f64) -> f64 {
    if v.is_finite() {
        fmt_float(v).parse().unwrap_or(v)
    } else {
        v
    }
}

pub fn fmt_rational(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// One line of the per-checkpoint table.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub q: u64,
    pub phi_q: u64,
    pub psi_q: f64,
    pub measure: MeasureEstimate,
}

impl Row {
    /// Monte Carlo rows carry a confidence interval; other rows leave it empty.
    pub fn ci(&self) -> Option<(f64, f64)> {
        match self.measure.provenance {
            Provenance::MonteCarlo { ci_low, ci_high, .. } => Some((ci_low, ci_high)),
            _ => None,
        }
    }
}

/// Rows for `(q, estimate)` pairs, filling in `φ(q)` and `ψ(q)`.
pub fn rows_for(f: &ApproxFunction, points: &[(u64, MeasureEstimate)]) -> Result<Vec<Row>> {
    let top = points.iter().map(|p| p.0).max().unwrap_or(1);
    let table = PhiTable::new(top)?;
    points
        .iter()
        .map(|(q, m)| {
            Ok(Row {
                q: *q,
                phi_q: table.phi(*q)?,
                psi_q: f.value(*q),
                measure: m.clone(),
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> Result<()> {
    let io = |e: csv::Error| Error::Validation(format!("csv output failed: {e}"));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        let (lo, hi) = r
            .ci()
            .map_or((String::new(), String::new()), |(lo, hi)| (fmt_float(lo), fmt_float(hi)));
        w.write_record([
            r.q.to_string(),
            r.phi_q.to_string(),
            fmt_float(r.psi_q),
            fmt_float(r.measure.value),
            r.measure.provenance.label().to_string(),
            lo,
            hi,
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Validation(format!("csv output failed: {e}")))?;
    Ok(())
}

pub fn csv_string(rows: &[Row]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct RowJson {
    q: u64,
    phi_q: u64,
    psi_q: f64,
    measure: f64,
    provenance: &'static str,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
}

impl From<&Row> for RowJson {
    fn from(r: &Row) -> Self {
        let ci = r.ci();
        Self {
            q: r.q,
            phi_q: r.phi_q,
            psi_q: round12(r.psi_q),
            measure: round12(r.measure.value),
            provenance: r.measure.provenance.label(),
            ci_low: ci.map(|c| round12(c.0)),
            ci_high: ci.map(|c| round12(c.1)),
        }
    }
}

/// JSON summary of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub command: String,
    pub config: Config,
    pub seed: Option<u64>,
    /// Named row tables (one per experiment).
    pub tables: Vec<(String, Vec<Row>)>,
    /// Additional command-specific results, already rounded by the caller.
    pub extra: Value,
    pub anomalies: Vec<String>,
}

impl Summary {
    pub fn to_json(&self) -> String {
        let tables: serde_json::Map<String, Value> = self
            .tables
            .iter()
            .map(|(name, rows)| {
                let rows: Vec<RowJson> = rows.iter().map(RowJson::from).collect();
                (name.clone(), serde_json::to_value(rows).expect("rows serialize"))
            })
            .collect();
        let doc = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": self.config,
            "config_hash": self.config.hash(),
            "seed": self.seed,
            "generator": GENERATOR_ID,
            "rows": tables,
            "results": self.extra,
            "anomalies": self.anomalies,
            "disclaimer": DISCLAIMER,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("summary serializes");
        s.push('\n');
        s
    }
}
