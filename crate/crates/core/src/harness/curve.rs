//! Outage-curve CSV: `#` header lines followed by one row per `γ̄` point.
//!
//! The header records the crate version, a timestamp line, the full scenario
//! and the fitted parameters. Only the `# generated` line varies between runs
//! of the same scenario.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};

use super::{emit_config, OpPoint, RunReport};

pub const COLUMNS: &str = "gamma_bar_db,op_monte_carlo,op_em,op_mom,op_ks,trials_used";

fn num(x: Option<f64>) -> String {
    match x {
        Some(v) if !v.is_nan() => format!("{v:.12e}"),
        _ => "nan".to_string(),
    }
}

pub fn write_curve(report: &RunReport) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "# fris-core {}", env!("CARGO_PKG_VERSION"));
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let _ = writeln!(o, "# generated unix_time={now} wall_time_s={:.3}", report.wall_time_s);
    let _ = writeln!(o, "# truncated={}", report.truncated);
    for line in emit_config(&report.spec).lines().filter(|l| !l.is_empty()) {
        let _ = writeln!(o, "# {line}");
    }
    let m = &report.models;
    if let Some(em) = &m.em {
        let _ = writeln!(o, "# fit.em {em} converged={}", em.converged);
    }
    if let Some(c) = &m.mom {
        let _ = writeln!(o, "# fit.mom m={:.10e} omega={:.10e}", c.shape, c.mean_power);
    }
    if let Some(c) = &m.ks {
        let _ = writeln!(o, "# fit.ks m={:.10e} omega={:.10e}", c.shape, c.mean_power);
    }
    let _ = writeln!(o, "{COLUMNS}");
    for p in &report.points {
        let _ = writeln!(
            o,
            "{},{},{},{},{},{}",
            num(Some(p.gamma_bar_db)),
            num(Some(p.op_monte_carlo)),
            num(p.op_em),
            num(p.op_mom),
            num(p.op_ks),
            p.trials_used
        );
    }
    o
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveFile {
    /// Header lines without the leading `# `.
    pub header: Vec<String>,
    pub points: Vec<OpPoint>,
}

pub fn read_curve(text: &str) -> Result<CurveFile> {
    let mut header = Vec::new();
    let mut points = Vec::new();
    let mut seen_columns = false;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if let Some(h) = line.strip_prefix('#') {
            header.push(h.trim_start().to_string());
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !seen_columns {
            if line.trim() != COLUMNS {
                return Err(Error::Parse {
                    key: "columns".into(),
                    line: line_no,
                    reason: format!("expected `{COLUMNS}`"),
                });
            }
            seen_columns = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                key: "row".into(),
                line: line_no,
                reason: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        let f = |k: usize| -> Result<f64> {
            fields[k].parse::<f64>().map_err(|e| Error::Parse {
                key: COLUMNS.split(',').nth(k).unwrap_or("?").to_string(),
                line: line_no,
                reason: e.to_string(),
            })
        };
        let opt = |k: usize| -> Result<Option<f64>> { f(k).map(|v| (!v.is_nan()).then_some(v)) };
        points.push(OpPoint {
            gamma_bar_db: f(0)?,
            op_monte_carlo: f(1)?,
            op_em: opt(2)?,
            op_mom: opt(3)?,
            op_ks: opt(4)?,
            trials_used: fields[5].parse().map_err(|e: std::num::ParseIntError| Error::Parse {
                key: "trials_used".into(),
                line: line_no,
                reason: e.to_string(),
            })?,
        });
    }
    Ok(CurveFile { header, points })
}
