//! `fjr`: run scenarios, parameter sweeps and the analytic self-checks.
//!
//! Exit codes: 0 success, 1 I/O or verification failure, 2 invalid input,
//! 3 numerical blow-up. Failures are also reported as one JSON object on
//! stderr and, when an output directory is known, in `failure.json`.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fjr_core::sim::{
    diagnose, motivating_example, run_scenario, tikhonov_sweep, ScenarioConfig, SimError, SimTrace,
};
use fjr_core::verify;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use config::{ConfigFile, Resolved};
use output::{Metadata, SummaryRow};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config at `{key}`: {message}")]
    InvalidConfig { key: String, message: String },
    #[error("cannot read {path}: {message}")]
    MissingInput { path: String, message: String },
    #[error("simulation diverged at t = {t}")]
    Diverged { t: f64 },
    #[error("{0}")]
    Sim(SimError),
    #[error("i/o: {0}")]
    Io(String),
    #[error("{0} verification check(s) failed")]
    ChecksFailed(usize),
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Diverged { t } => CliError::Diverged { t },
            SimError::InvalidConfig(m) => CliError::InvalidConfig {
                key: "scenario".into(),
                message: m,
            },
            e => CliError::Sim(e),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::InvalidConfig { .. } | CliError::MissingInput { .. } => 2,
            CliError::Diverged { .. } => 3,
            _ => 1,
        }
    }

    fn report(&self) -> FailureReport {
        let (kind, key, t) = match self {
            CliError::InvalidConfig { key, .. } => ("invalid_config", Some(key.clone()), None),
            CliError::MissingInput { path, .. } => ("missing_input", Some(path.clone()), None),
            CliError::Diverged { t } => ("diverged", None, Some(*t)),
            CliError::Sim(_) => ("simulation", None, None),
            CliError::Io(_) => ("io", None, None),
            CliError::ChecksFailed(_) => ("checks_failed", None, None),
        };
        FailureReport {
            status: "error",
            code: self.code(),
            kind,
            key,
            t,
            message: self.to_string(),
        }
    }
}

#[derive(Debug, Serialize)]
struct FailureReport {
    status: &'static str,
    code: u8,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    message: String,
}

#[derive(Parser)]
#[command(
    name = "fjr",
    version,
    about = "Flexible-joint robot friction observer simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset, a TOML config or a metadata sidecar from an earlier run.
    Run {
        /// Preset name, `verify`, or a path to a .toml/.json file.
        source: String,
        #[arg(long)]
        out: PathBuf,
        /// Integration step [s]; the sampling period is kept when possible.
        #[arg(long)]
        dt: Option<f64>,
        /// [s]
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one scenario per value of a numeric config key.
    Sweep {
        /// Preset name or TOML config.
        source: String,
        /// Dotted key such as `observer.L` or `controller.kp`.
        #[arg(long)]
        param: String,
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Riccati, filter-equivalence, passivity and friction checks.
    Verify {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match &cli.command {
        Command::Run { out, .. } | Command::Sweep { out, .. } | Command::Verify { out } => {
            out.clone()
        }
    };
    let result = match cli.command {
        Command::Run {
            source,
            out,
            dt,
            duration,
            seed,
        } => run(&source, &out, dt, duration, seed),
        Command::Sweep {
            source,
            param,
            values,
            out,
        } => sweep(&source, &param, &values, &out),
        Command::Verify { out } => run_verify(&out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = e.report();
            let json = serde_json::to_string(&report).unwrap_or_default();
            eprintln!("{json}");
            if out.is_dir() {
                let _ = output::write_json(&out.join("failure.json"), &report);
            }
            ExitCode::from(e.code())
        }
    }
}

fn create_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}

fn override_run(
    mut r: Resolved,
    dt: Option<f64>,
    duration: Option<f64>,
    seed: Option<u64>,
) -> Result<Resolved, CliError> {
    if let Some(dt) = dt {
        r.scenario = r.scenario.with_dt(dt);
    }
    if let Some(d) = duration {
        r.scenario.duration = d;
    }
    if let Some(s) = seed {
        r.scenario.seed = s;
    }
    r.scenario.validate().map_err(|e| CliError::InvalidConfig {
        key: "--dt/--duration".into(),
        message: e.to_string(),
    })?;
    Ok(r)
}

/// Write `<name>.csv` and `<name>.json` for one run.
fn save_run<X: Serialize>(
    out: &Path,
    r: &Resolved,
    trace: &SimTrace,
    report: Option<X>,
) -> Result<fjr_core::sim::Diagnostics, CliError> {
    let cfg = &r.scenario;
    let diagnostics = diagnose(cfg, trace)?;
    if r.outputs.trace {
        output::write_trace(&out.join(format!("{}.csv", cfg.name)), trace)?;
    }
    if r.outputs.metadata {
        let meta = Metadata {
            config: cfg,
            columns: trace.header(),
            samples: trace.len(),
            diagnostics: &diagnostics,
            report,
        };
        output::write_json(&out.join(format!("{}.json", cfg.name)), &meta)?;
    }
    Ok(diagnostics)
}

fn run(
    source: &str,
    out: &Path,
    dt: Option<f64>,
    duration: Option<f64>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    if source == "verify" {
        return run_verify(out);
    }
    let resolved = override_run(config::load(source)?, dt, duration, seed)?;
    create_dir(out)?;
    let cfg = &resolved.scenario;
    if source == "motivating" {
        let (report, with, without) = motivating_example(cfg)?;
        let mut bare = resolved.clone();
        bare.scenario.name = format!("{}-none", cfg.name);
        bare.scenario.observer = fjr_core::sim::ObserverConfig::none();
        save_run(out, &bare, &without, None::<()>)?;
        save_run(out, &resolved, &with, Some(&report))?;
        println!(
            "{}: uncompensated theta_end = {:.3e}, first breakaway force = {}, slip episodes = {}",
            cfg.name,
            report.uncompensated_theta_end,
            report
                .first_breakaway_force
                .map_or("none".into(), |f| format!("{f:.4}")),
            report.slip_episodes
        );
        return Ok(());
    }
    let trace = run_scenario(cfg)?;
    let diag = if source == "tikhonov" {
        let ls = [25.0, 50.0, 100.0, 200.0];
        let points = tikhonov_sweep(cfg, &ls)?;
        let rows: Vec<SummaryRow> = points
            .iter()
            .map(|p| SummaryRow {
                value: p.l,
                status: if p.tracking_error.is_ok() {
                    "ok"
                } else {
                    "diverged"
                }
                .into(),
                tracking_error: p.tracking_error.as_ref().ok().copied(),
                oscillation: None,
                amplitude: None,
                ss_error: None,
                message: p.tracking_error.as_ref().err().cloned().unwrap_or_default(),
            })
            .collect();
        output::write_summary(&out.join(format!("{}_summary.csv", cfg.name)), &rows)?;
        save_run(out, &resolved, &trace, Some(&points))?
    } else {
        save_run(out, &resolved, &trace, None::<()>)?
    };
    print_diagnostics(cfg, &diag);
    Ok(())
}

fn print_diagnostics(cfg: &ScenarioConfig, d: &fjr_core::sim::Diagnostics) {
    println!(
        "{}: oscillation = {} (p2p {:.3e}), ss error = {:?}, tracking error = {}",
        cfg.name,
        d.oscillation.flag,
        d.oscillation.amplitude,
        d.steady_state_error,
        d.tracking_error
            .map_or("n/a".into(), |e| format!("{e:.3e}"))
    );
}

fn sweep(source: &str, param: &str, values: &[f64], out: &Path) -> Result<(), CliError> {
    let table = config::load_table(source)?;
    // fail early on a key that is invalid for every value
    ConfigFile::from_table(table.clone())?;
    if !param.contains('.') {
        return Err(CliError::InvalidConfig {
            key: param.into(),
            message: "sweep parameter must be written as section.key".into(),
        });
    }
    create_dir(out)?;
    let results: Vec<(SummaryRow, Option<CliError>)> = values
        .par_iter()
        .map(|&v| {
            let attempt = || -> Result<SummaryRow, CliError> {
                let mut t = table.clone();
                config::set_number(&mut t, param, v)?;
                let mut r = ConfigFile::from_table(t)?.resolve()?;
                r.scenario.name = format!("{}_{param}_{v}", r.scenario.name);
                let trace = run_scenario(&r.scenario)?;
                let d = save_run(out, &r, &trace, None::<()>)?;
                Ok(SummaryRow {
                    value: v,
                    status: "ok".into(),
                    tracking_error: d.tracking_error,
                    oscillation: Some(d.oscillation.flag),
                    amplitude: Some(d.oscillation.amplitude),
                    ss_error: Some(d.steady_state_error.iter().fold(0.0, |a, e| a.max(e.abs()))),
                    message: String::new(),
                })
            };
            attempt().map(|r| (r, None)).unwrap_or_else(|e| {
                let row = SummaryRow {
                    value: v,
                    status: match e.code() {
                        2 => "rejected",
                        3 => "diverged",
                        _ => "failed",
                    }
                    .into(),
                    tracking_error: None,
                    oscillation: None,
                    amplitude: None,
                    ss_error: None,
                    message: e.to_string(),
                };
                (row, Some(e))
            })
        })
        .collect();
    let (rows, errors): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    output::write_summary(&out.join("summary.csv"), &rows)?;
    for r in &rows {
        match r.status.as_str() {
            "ok" => println!(
                "{param} = {}: tracking error = {}, oscillation = {}, ss error = {:.3e}",
                r.value,
                r.tracking_error
                    .map_or("n/a".into(), |e| format!("{e:.3e}")),
                r.oscillation.unwrap_or(false),
                r.ss_error.unwrap_or(f64::NAN)
            ),
            s => eprintln!("{param} = {}: {s}: {}", r.value, r.message),
        }
    }
    // nonzero only when no value produced a run
    match errors.into_iter().collect::<Option<Vec<_>>>() {
        Some(mut all) if !all.is_empty() => Err(all.swap_remove(0)),
        _ => Ok(()),
    }
}

fn run_verify(out: &Path) -> Result<(), CliError> {
    create_dir(out)?;
    let checks = verify::run_all();
    output::print_checks(&mut std::io::stdout().lock(), &checks)
        .map_err(|e| CliError::Io(e.to_string()))?;
    output::write_json(&out.join("verify.json"), &checks)?;
    output::write_checks(&out.join("verify.csv"), &checks)?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("{} checks, {} failed", checks.len(), failed);
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use fjr_core::sim::presets;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Diverged { t: 1.0 }.code(), 3);
        let e = CliError::InvalidConfig {
            key: "observer.L_i".into(),
            message: "x".into(),
        };
        assert_eq!(e.code(), 2);
        assert_eq!(e.report().key.as_deref(), Some("observer.L_i"));
        assert_eq!(CliError::from(SimError::Diverged { t: 0.5 }).code(), 3);
    }

    #[test]
    fn presets_resolve_without_files() {
        for name in presets::NAMES {
            assert_eq!(config::load(name).unwrap().scenario.name, name);
        }
    }
}
