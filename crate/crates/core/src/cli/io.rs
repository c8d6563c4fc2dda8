//! Waveform and trace files.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::solver::SolveTrace;
use crate::CVector;

/// Shortest round-trip text for `x`, switching to exponent form for very
/// large or small magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// One `re im` pair per line. `f64` formatting is shortest-round-trip, so the
/// file reloads bit-exactly.
pub fn format_waveform(s: &CVector) -> String {
    let mut out = String::with_capacity(s.len() * 48);
    for z in s.iter() {
        out.push_str(&format!("{} {}\n", fmt_f64(z.re), fmt_f64(z.im)));
    }
    out
}

/// Accepts whitespace- or comma-separated pairs; blank lines and `#`
/// comments are skipped.
pub fn parse_waveform(text: &str) -> Result<CVector> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let bad = |msg: String| Error::config(format!("waveform line {}", lineno + 1), msg);
        if fields.len() != 2 {
            return Err(bad(format!("expected 2 columns, found {}", fields.len())));
        }
        let re = fields[0].parse::<f64>().map_err(|e| bad(format!("`{}`: {e}", fields[0])))?;
        let im = fields[1].parse::<f64>().map_err(|e| bad(format!("`{}`: {e}", fields[1])))?;
        values.push(Complex64::new(re, im));
    }
    Ok(CVector::from_vec(values))
}

pub fn write_waveform(path: &Path, s: &CVector) -> Result<()> {
    fs::write(path, format_waveform(s)).map_err(|e| Error::io(path, e))
}

pub fn read_waveform(path: &Path) -> Result<CVector> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_waveform(&text)
}

pub const TRACE_HEADER: [&str; 8] = [
    "iteration",
    "g",
    "sinr_db",
    "stepsize",
    "backtracks",
    "gradnorm",
    "residual",
    "elapsed_s",
];

pub fn write_trace(path: &Path, trace: &SolveTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        w.write_record([
            r.iteration.to_string(),
            fmt_f64(r.objective),
            fmt_f64(r.sinr_db),
            fmt_f64(r.stepsize),
            r.backtracks.to_string(),
            fmt_f64(r.gradnorm),
            fmt_f64(r.residual),
            fmt_f64(r.elapsed_s),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("value serializes") + "\n"
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, to_json_string(value)).map_err(|e| Error::io(path, e))
}
