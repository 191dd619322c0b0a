//! Trace, metadata and summary files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use fjr_core::sim::{Diagnostics, ScenarioConfig, SimTrace};
use serde::Serialize;

use crate::CliError;

/// 17 significant digits, enough to recover every f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn write_trace(path: &Path, trace: &SimTrace) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(trace.header())
        .map_err(|e| io_err(path, e))?;
    for k in 0..trace.len() {
        w.write_record(trace.row(k).into_iter().map(fmt_f64))
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[cfg(test)]
pub fn read_trace(path: &Path) -> Result<SimTrace, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| io_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| io_err(path, format!("{s:?}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    SimTrace::from_table(&header, &rows).map_err(|e| io_err(path, e))
}

/// Sidecar written next to every trace. `config` is the fully resolved
/// scenario, so `fjr run <sidecar>.json` reproduces the run.
#[derive(Debug, Serialize)]
pub struct Metadata<'a, X: Serialize> {
    pub config: &'a ScenarioConfig,
    pub columns: Vec<String>,
    pub samples: usize,
    pub diagnostics: &'a Diagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<X>,
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// One row of a sweep summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub value: f64,
    /// `ok`, `rejected` or `diverged`.
    pub status: String,
    pub tracking_error: Option<f64>,
    pub oscillation: Option<bool>,
    pub amplitude: Option<f64>,
    /// Largest steady-state error over the joints.
    pub ss_error: Option<f64>,
    pub message: String,
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record([
        "value",
        "status",
        "tracking_error",
        "oscillation",
        "amplitude",
        "ss_error",
        "message",
    ])
    .map_err(|e| io_err(path, e))?;
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    for r in rows {
        w.write_record([
            fmt_f64(r.value),
            r.status.clone(),
            opt(r.tracking_error),
            r.oscillation.map(|b| b.to_string()).unwrap_or_default(),
            opt(r.amplitude),
            opt(r.ss_error),
            r.message.clone(),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_checks(path: &Path, checks: &[fjr_core::verify::Check]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(["suite", "name", "value", "criterion", "pass"])
        .map_err(|e| io_err(path, e))?;
    for c in checks {
        w.write_record([
            c.suite.clone(),
            c.name.clone(),
            fmt_f64(c.value),
            c.criterion.clone(),
            c.pass.to_string(),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn print_checks(
    out: &mut impl Write,
    checks: &[fjr_core::verify::Check],
) -> std::io::Result<()> {
    for c in checks {
        writeln!(
            out,
            "{:<4} {:<10} {:<48} {:>12.3e}  {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.suite,
            c.name,
            c.value,
            c.criterion
        )?;
    }
    Ok(())
}
