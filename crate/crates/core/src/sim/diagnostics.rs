use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::trace::{Signal, SimTrace};
use super::SimError;
use crate::friction::friction_bound_audit;
use crate::observer::{equilibrium_prediction, ObserverKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Oscillation {
    pub flag: bool,
    /// Largest peak-to-peak motor position over the window, across joints.
    pub amplitude: f64,
    pub window: f64,
    pub threshold: f64,
}

fn peak_to_peak(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Peak-to-peak of the motor position over the trailing window.
pub fn detect_oscillation(
    trace: &SimTrace,
    window: f64,
    threshold: f64,
) -> Result<Oscillation, SimError> {
    let start = trace.window_start(window)?;
    let amplitude = trace
        .joints
        .iter()
        .map(|j| peak_to_peak(&j.get(Signal::Theta)[start..]))
        .fold(0.0, f64::max);
    Ok(Oscillation {
        flag: amplitude > threshold,
        amplitude,
        window,
        threshold,
    })
}

/// `mean(theta - theta_d)` over the trailing window, per joint.
pub fn steady_state_error(trace: &SimTrace, window: f64) -> Result<Vec<f64>, SimError> {
    let start = trace.window_start(window)?;
    Ok(trace
        .joints
        .iter()
        .map(|j| {
            let th = &j.get(Signal::Theta)[start..];
            let td = &j.get(Signal::ThetaD)[start..];
            th.iter().zip(td).map(|(a, b)| a - b).sum::<f64>() / th.len() as f64
        })
        .collect())
}

/// `E(t) = int (-e_nr')^T tau_f_hat` by the trapezoidal rule, with
/// `e_nr' = theta_n' - theta'`.
pub fn observer_energy(trace: &SimTrace) -> Vec<f64> {
    let supply = |k: usize| -> f64 {
        trace
            .joints
            .iter()
            .map(|j| {
                -(j.get(Signal::ThetaNDot)[k] - j.get(Signal::ThetaDot)[k])
                    * j.get(Signal::TauFHat)[k]
            })
            .sum()
    };
    let mut e = Vec::with_capacity(trace.len());
    let mut acc = 0.0;
    let mut prev = if trace.is_empty() { 0.0 } else { supply(0) };
    for k in 0..trace.len() {
        if k > 0 {
            let cur = supply(k);
            acc += 0.5 * (trace.t[k] - trace.t[k - 1]) * (prev + cur);
            prev = cur;
        }
        e.push(acc);
    }
    e
}

/// Measured rest values of the observer against the predicted rest point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumCheck {
    /// Mean friction force over the window, in the friction model's resisting
    /// convention (`-tau_f_true`).
    pub friction_mean: f64,
    pub e_nr_measured: f64,
    pub e_nr_predicted: f64,
    pub i_enr_measured: f64,
    pub i_enr_predicted: Option<f64>,
    /// `|measured - predicted| / |predicted|` for the integral state.
    pub i_enr_relative_error: Option<f64>,
    /// Steady motor offset implied by the prediction, `-e_nr_predicted`.
    pub offset_predicted: f64,
    pub offset_measured: f64,
    pub offset_relative_error: f64,
}

/// Recorded time span; analysis windows longer than this cover the whole trace.
fn span(trace: &SimTrace) -> Result<f64, SimError> {
    match (trace.t.first(), trace.t.last()) {
        (Some(t0), Some(t1)) if t1 > t0 => Ok(t1 - t0),
        _ => Err(SimError::EmptyWindow),
    }
}

/// Compare the trailing window of joint `j` with the observer rest point.
pub fn equilibrium_check(
    cfg: &ScenarioConfig,
    trace: &SimTrace,
    j: usize,
) -> Result<EquilibriumCheck, SimError> {
    let kind = cfg.observer.kind;
    let window = cfg.analysis.steady_window.min(span(trace)?);
    let start = trace.window_start(window)?;
    let jt = trace.joint(j);
    let friction_mean = -mean(&jt.get(Signal::TauFTrue)[start..]);
    let b = cfg.plant.motor_inertia[j];
    let pred = equilibrium_prediction(b, &cfg.observer.gains, kind, friction_mean)
        .map_err(|e| SimError::Unsupported(e.to_string()))?;
    let e_nr_measured = mean(&jt.get(Signal::ENr)[start..]);
    let i_enr_measured = mean(&jt.get(Signal::IEnr)[start..]);
    let offset_measured = steady_state_error(trace, window)?[j];
    let rel = |m: f64, p: f64| {
        if p != 0.0 {
            (m - p).abs() / p.abs()
        } else {
            m.abs()
        }
    };
    Ok(EquilibriumCheck {
        friction_mean,
        e_nr_measured,
        e_nr_predicted: pred.e_nr,
        i_enr_measured,
        i_enr_predicted: pred.i_enr,
        i_enr_relative_error: pred.i_enr.map(|p| rel(i_enr_measured, p)),
        offset_predicted: -pred.e_nr,
        offset_measured,
        offset_relative_error: rel(offset_measured, -pred.e_nr),
    })
}

/// Bound `|w| <= b1 |x_nr| + b2 |theta'| + b3 |theta_n'| + b4` on the
/// perturbation of the difference dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationMonitor {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    /// Largest `|w| / bound` along the trace.
    pub worst_ratio: f64,
    /// Smallest offset that would make the bound hold with `b1..b3` fixed.
    pub fitted_b4: f64,
    pub holds: bool,
}

/// Reconstruct `w = -tau_f + B L_p e' + B L_i e` (PID) or
/// `w = -tau_f + B L_p e'` (PD) and check it against the growth bound implied
/// by the friction law. `None` when the kind or friction model has no such
/// bound.
pub fn perturbation_monitor(cfg: &ScenarioConfig, trace: &SimTrace) -> Option<PerturbationMonitor> {
    let kind = cfg.observer.kind;
    if !matches!(kind, ObserverKind::Pid | ObserverKind::Pd) {
        return None;
    }
    let g = &cfg.observer.gains;
    let mut out: Option<PerturbationMonitor> = None;
    for (j, jt) in trace.joints.iter().enumerate() {
        let p = cfg.plant.friction[j].lugre()?;
        let bj = cfg.plant.motor_inertia[j];
        let audit = friction_bound_audit(&[], &[], p);
        let (b1, b2, b3, b4) = (bj * (g.l_p + g.l_i), audit.a1, 0.0, audit.a2);
        let (mut worst, mut fitted) = (0.0f64, 0.0f64);
        for k in 0..trace.len() {
            let e = jt.get(Signal::ENr)[k];
            let ed = jt.get(Signal::ThetaNDot)[k] - jt.get(Signal::ThetaDot)[k];
            let ie = jt.get(Signal::IEnr)[k];
            let w = -jt.get(Signal::TauFTrue)[k] + bj * g.l_p * ed + bj * g.l_i * e;
            let x = if kind == ObserverKind::Pid {
                (ie * ie + e * e + ed * ed).sqrt()
            } else {
                (e * e + ed * ed).sqrt()
            };
            let lin = b1 * x
                + b2 * jt.get(Signal::ThetaDot)[k].abs()
                + b3 * jt.get(Signal::ThetaNDot)[k].abs();
            worst = worst.max(w.abs() / (lin + b4));
            fitted = fitted.max(w.abs() - lin);
        }
        let m = PerturbationMonitor {
            b1,
            b2,
            b3,
            b4,
            worst_ratio: worst,
            fitted_b4: fitted,
            holds: worst <= 1.01,
        };
        out = Some(match out {
            Some(prev) if prev.worst_ratio >= m.worst_ratio => prev,
            _ => m,
        });
    }
    out
}

/// Rest conditions of a converged regulation run over the trailing window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestCheck {
    /// Peak-to-peak joint torque.
    pub tau_j_spread: f64,
    /// Largest nominal motor speed.
    pub theta_n_dot_max: f64,
    /// Both of the above at most `1e-6`.
    pub holds: bool,
}

pub fn rest_check(trace: &SimTrace, window: f64) -> Result<RestCheck, SimError> {
    let start = trace.window_start(window)?;
    let mut spread = 0.0f64;
    let mut speed = 0.0f64;
    for jt in &trace.joints {
        spread = spread.max(peak_to_peak(&jt.get(Signal::TauJ)[start..]));
        speed = jt.get(Signal::ThetaNDot)[start..]
            .iter()
            .fold(speed, |m, v| m.max(v.abs()));
    }
    Ok(RestCheck {
        tau_j_spread: spread,
        theta_n_dot_max: speed,
        holds: spread <= 1e-6 && speed <= 1e-6,
    })
}

/// Largest `|theta - (theta_n - e_nr)|` over the trace.
pub fn bookkeeping_residual(trace: &SimTrace) -> f64 {
    let mut worst = 0.0f64;
    for jt in &trace.joints {
        let (th, thn, e) = (
            jt.get(Signal::Theta),
            jt.get(Signal::ThetaN),
            jt.get(Signal::ENr),
        );
        for k in 0..trace.len() {
            worst = worst.max((th[k] - (thn[k] - e[k])).abs());
        }
    }
    worst
}

/// `max |z| / (f_s / sigma0)`; at most one when the bristle starts inside
/// its admissible band.
pub fn bristle_bound_ratio(cfg: &ScenarioConfig, trace: &SimTrace) -> Option<f64> {
    let mut worst: Option<f64> = None;
    for (j, jt) in trace.joints.iter().enumerate() {
        if let Some(p) = cfg.plant.friction[j].lugre() {
            let zmax = jt.get(Signal::Z).iter().fold(0.0f64, |m, z| m.max(z.abs()));
            let r = zmax / p.max_deflection();
            worst = Some(worst.map_or(r, |w: f64| w.max(r)));
        }
    }
    worst
}

/// `max |theta - theta_ideal|` from `t0` on, across joints.
pub fn tracking_error(trace: &SimTrace, t0: f64) -> Result<f64, SimError> {
    if !trace.has_ideal() {
        return Err(SimError::Unsupported("trace has no ideal reference".into()));
    }
    let start = trace.index_at(t0);
    if start >= trace.len() {
        return Err(SimError::EmptyWindow);
    }
    let mut worst = 0.0f64;
    for jt in &trace.joints {
        for (a, b) in jt.get(Signal::Theta)[start..]
            .iter()
            .zip(&jt.get(Signal::ThetaIdeal)[start..])
        {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// Trace-level summary stored next to every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub oscillation: Oscillation,
    pub steady_state_error: Vec<f64>,
    /// Set when the steady-state error was taken over an oscillating window.
    pub steady_state_caveat: bool,
    pub observer_energy_min: f64,
    pub observer_energy_end: f64,
    /// Observer rest-point comparison per joint (PID and PD only).
    pub equilibrium: Option<Vec<EquilibriumCheck>>,
    pub perturbation: Option<PerturbationMonitor>,
    pub rest: RestCheck,
    pub bookkeeping_residual: f64,
    pub bristle_bound_ratio: Option<f64>,
    /// `max |theta - theta_ideal|` after the transient, when available.
    pub tracking_error: Option<f64>,
    pub theta_end: Vec<f64>,
    pub e_nr_end: Vec<f64>,
    pub i_enr_end: Vec<f64>,
}

pub fn diagnose(cfg: &ScenarioConfig, trace: &SimTrace) -> Result<Diagnostics, SimError> {
    let a = &cfg.analysis;
    let span = span(trace)?;
    let oscillation = detect_oscillation(
        trace,
        a.oscillation_window.min(span),
        a.oscillation_threshold,
    )?;
    let energy = observer_energy(trace);
    let equilibrium = if matches!(cfg.observer.kind, ObserverKind::Pid | ObserverKind::Pd) {
        Some(
            (0..trace.dof())
                .map(|j| equilibrium_check(cfg, trace, j))
                .collect::<Result<Vec<_>, _>>()?,
        )
    } else {
        None
    };
    let last = |s: Signal| {
        trace
            .joints
            .iter()
            .map(|j| *j.get(s).last().unwrap())
            .collect::<Vec<_>>()
    };
    let steady_window = a.steady_window.min(span);
    Ok(Diagnostics {
        steady_state_error: steady_state_error(trace, steady_window)?,
        steady_state_caveat: detect_oscillation(trace, steady_window, a.oscillation_threshold)?
            .flag,
        oscillation,
        observer_energy_min: energy.iter().copied().fold(0.0, f64::min),
        observer_energy_end: energy.last().copied().unwrap_or(0.0),
        equilibrium,
        perturbation: perturbation_monitor(cfg, trace),
        rest: rest_check(trace, steady_window)?,
        bookkeeping_residual: bookkeeping_residual(trace),
        bristle_bound_ratio: bristle_bound_ratio(cfg, trace),
        tracking_error: if trace.has_ideal() {
            Some(tracking_error(
                trace,
                a.transient.min(*trace.t.last().unwrap()),
            )?)
        } else {
            None
        },
        theta_end: last(Signal::Theta),
        e_nr_end: last(Signal::ENr),
        i_enr_end: last(Signal::IEnr),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(theta: impl Fn(f64) -> f64, dur: f64, dt: f64) -> SimTrace {
        let n = (dur / dt).round() as usize + 1;
        let mut tr = SimTrace::new(1, dt, n);
        for k in 0..n {
            let t = k as f64 * dt;
            tr.t.push(t);
            for s in Signal::ALL {
                match s {
                    Signal::Theta => tr.joints[0].push(s, theta(t)),
                    Signal::ThetaIdeal => {}
                    _ => tr.joints[0].push(s, 0.0),
                }
            }
        }
        tr
    }

    #[test]
    fn constant_trace_does_not_oscillate() {
        let tr = synthetic(|_| 0.01, 10.0, 1e-3);
        let o = detect_oscillation(&tr, 2.0, 1e-4).unwrap();
        assert!(!o.flag);
        assert_eq!(o.amplitude, 0.0);
    }

    #[test]
    fn sinusoid_peak_to_peak() {
        let tr = synthetic(
            |t| 1e-3 * (2.0 * std::f64::consts::PI * 1.0 * t).sin(),
            10.0,
            1e-3,
        );
        let o = detect_oscillation(&tr, 2.0, 1e-4).unwrap();
        assert!(o.flag);
        assert!((o.amplitude - 2e-3).abs() < 1e-6);
        assert!(detect_oscillation(&tr, 20.0, 1e-4).is_err());
    }

    #[test]
    fn zero_trace_energy_and_errors() {
        let tr = synthetic(|_| 0.0, 1.0, 1e-3);
        assert!(observer_energy(&tr).iter().all(|e| *e == 0.0));
        assert_eq!(steady_state_error(&tr, 0.5).unwrap(), vec![0.0]);
        assert_eq!(bookkeeping_residual(&tr), 0.0);
        assert!(tracking_error(&tr, 0.0).is_err());
    }
}
