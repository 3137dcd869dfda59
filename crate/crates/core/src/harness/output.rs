//! Long-format curve tables: one row per `(step, method)`.
//!
//! Floats are written with 17 significant digits so a parse returns the exact
//! bits that were written.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dephasing::FidelityCurve;
use crate::error::Result;

pub const CSV_HEADER: [&str; 8] = ["step", "t", "method", "M", "amp_re", "amp_im", "stderr_re", "stderr_im"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: usize,
    pub t: f64,
    pub method: String,
    #[serde(rename = "M")]
    pub fidelity: f64,
    pub amp_re: f64,
    pub amp_im: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
}

/// Rows ordered by step, then by the order of `curves`.
pub fn rows(curves: &[FidelityCurve]) -> Vec<CurveRow> {
    let len = curves.iter().map(|c| c.points.len()).max().unwrap_or(0);
    let mut out = Vec::with_capacity(len * curves.len());
    for step in 0..len {
        for curve in curves {
            if let Some(p) = curve.points.get(step) {
                out.push(CurveRow {
                    step,
                    // one kick per unit time
                    t: step as f64,
                    method: curve.meta.method.as_str().to_string(),
                    fidelity: p.fidelity,
                    amp_re: p.amplitude.re,
                    amp_im: p.amplitude.im,
                    stderr_re: p.stderr_re,
                    stderr_im: p.stderr_im,
                });
            }
        }
    }
    out
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(writer: W, curves: &[FidelityCurve]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in rows(curves) {
        w.write_record([
            r.step.to_string(),
            format!("{}", r.t),
            r.method,
            fmt_float(r.fidelity),
            fmt_float(r.amp_re),
            fmt_float(r.amp_im),
            fmt_float(r.stderr_re),
            fmt_float(r.stderr_im),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<CurveRow>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_json<W: Write>(writer: W, curves: &[FidelityCurve]) -> Result<()> {
    serde_json::to_writer_pretty(writer, &serde_json::json!({ "rows": rows(curves) }))?;
    Ok(())
}
