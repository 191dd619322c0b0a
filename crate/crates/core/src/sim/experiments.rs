use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ObserverConfig, ScenarioConfig};
use super::diagnostics::tracking_error;
use super::engine::{ideal_twin, Simulator};
use super::trace::{Signal, SimTrace};
use super::SimError;
use crate::friction::FrictionModel;
use crate::observer::ObserverKind;

/// Tracking error of one sweep value; failures are kept per value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub l: f64,
    pub tracking_error: Result<f64, String>,
}

/// Run `base` once per observer gain `L` (other gains fixed) and report
/// `max |theta - theta_ideal|` after `base.analysis.transient`.
pub fn tikhonov_sweep(base: &ScenarioConfig, ls: &[f64]) -> Result<Vec<SweepPoint>, SimError> {
    if base.controller.reference.is_regulation() {
        return Err(SimError::Unsupported(
            "gain sweep needs a sinusoidal reference".into(),
        ));
    }
    if !matches!(base.observer.kind, ObserverKind::Pid | ObserverKind::Pd) {
        return Err(SimError::Unsupported(
            "gain sweep needs a PID or PD observer".into(),
        ));
    }
    let ideal = Simulator::new(ideal_twin(base))?.run()?;
    let t0 = base.analysis.transient;
    Ok(ls
        .par_iter()
        .map(|&l| {
            let mut cfg = base.clone();
            cfg.name = format!("{}-L{l}", base.name);
            cfg.observer.gains.l = l;
            cfg.ideal_reference = false;
            let run = || -> Result<f64, SimError> {
                let mut tr = Simulator::new(cfg)?.run()?;
                for (jt, it) in tr.joints.iter_mut().zip(&ideal.joints) {
                    jt.set(Signal::ThetaIdeal, it.get(Signal::Theta).to_vec());
                }
                tracking_error(&tr, t0)
            };
            SweepPoint {
                l,
                tracking_error: run().map_err(|e| e.to_string()),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Motor speed first exceeds the Stribeck velocity after rest.
    SlipStart,
    /// Largest net motor force `tau_c - tau_f_hat` of a slip episode.
    Breakaway,
    /// Motor speed reverses or returns below the Stribeck velocity.
    Stick,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub net_force: f64,
    pub theta: f64,
}

/// Stick-slip episodes of joint 0.
///
/// An episode starts when `|theta'|` exceeds `v_slip` and ends at the first
/// sign change of `theta'`. Its breakaway force is the peak `|tau_c - tau_f_hat|`
/// between the previous episode's end and that sign change.
pub fn stick_slip_events(trace: &SimTrace, v_slip: f64) -> Vec<Event> {
    let j = trace.joint(0);
    let (v, th) = (j.get(Signal::ThetaDot), j.get(Signal::Theta));
    let net = |k: usize| j.get(Signal::TauC)[k] - j.get(Signal::TauFHat)[k];
    let mut events = Vec::new();
    let mut seg_start = 0;
    let mut slipping: Option<f64> = None;
    for k in 0..trace.len() {
        match slipping {
            None if v[k].abs() > v_slip => {
                slipping = Some(v[k].signum());
                events.push(Event {
                    t: trace.t[k],
                    kind: EventKind::SlipStart,
                    net_force: net(k),
                    theta: th[k],
                });
            }
            Some(dir) if v[k] * dir <= 0.0 => {
                let peak = (seg_start..k)
                    .max_by(|&a, &b| net(a).abs().total_cmp(&net(b).abs()))
                    .unwrap_or(k);
                events.push(Event {
                    t: trace.t[peak],
                    kind: EventKind::Breakaway,
                    net_force: net(peak),
                    theta: th[peak],
                });
                events.push(Event {
                    t: trace.t[k],
                    kind: EventKind::Stick,
                    net_force: net(k),
                    theta: th[k],
                });
                slipping = None;
                seg_start = k;
            }
            _ => {}
        }
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    events
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotivatingReport {
    /// Final motor position without any compensation.
    pub uncompensated_theta_end: f64,
    pub uncompensated_max_abs_theta: f64,
    /// Net motor force at the first breakaway with the observer on.
    pub first_breakaway_force: Option<f64>,
    pub first_breakaway_time: Option<f64>,
    pub slip_episodes: usize,
    /// Final `theta - theta_d` with the observer on.
    pub compensated_error_end: f64,
    pub events: Vec<Event>,
}

/// Run `cfg` with and without its observer and log the stick-slip narrative.
pub fn motivating_example(
    cfg: &ScenarioConfig,
) -> Result<(MotivatingReport, SimTrace, SimTrace), SimError> {
    let v_slip = match cfg.plant.friction[0] {
        FrictionModel::LuGre(p) => p.v_s,
        FrictionModel::FrictionFree => 1e-3,
    };
    let mut bare = cfg.clone();
    bare.name = format!("{}-none", cfg.name);
    bare.observer = ObserverConfig::none();
    let (with, without) = rayon::join(|| super::run_scenario(cfg), || super::run_scenario(&bare));
    let (with, without) = (with?, without?);
    let events = stick_slip_events(&with, v_slip);
    let first = events.iter().find(|e| e.kind == EventKind::Breakaway);
    let th0 = without.joint(0).get(Signal::Theta);
    let j = with.joint(0);
    let report = MotivatingReport {
        uncompensated_theta_end: *th0.last().unwrap(),
        uncompensated_max_abs_theta: th0.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        first_breakaway_force: first.map(|e| e.net_force),
        first_breakaway_time: first.map(|e| e.t),
        slip_episodes: events
            .iter()
            .filter(|e| e.kind == EventKind::SlipStart)
            .count(),
        compensated_error_end: j.get(Signal::Theta).last().unwrap()
            - j.get(Signal::ThetaD).last().unwrap(),
        events,
    };
    Ok((report, with, without))
}
