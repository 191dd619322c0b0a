//! Named scenarios.
//!
//! The single-link grid uses `B = M = 1`, `K_j = 3000`, `K_p = 50`,
//! `K_d = 5`, a step to `0.01` at `t = 0` and LuGre friction with its default
//! parameters. Low observer gains are `L = 50, L_p = 10, L_i = 25`, high
//! gains `L = 100, L_p = 20, L_i = 100`; the baseline keeps the row's `L` with
//! `L_p = L_i = 0`.

use super::config::{
    AnalysisConfig, BristleUpdate, ControllerConfig, InitialConditions, ObserverConfig,
    ScenarioConfig,
};
use crate::control::{PdGains, Reference};
use crate::friction::FrictionModel;
use crate::observer::{ObserverGains, ObserverKind};
use crate::plant::{FjrParams, LinkModel, Planar2RParams};

pub const FIG4: [&str; 6] = ["fig4a", "fig4b", "fig4c", "fig4d", "fig4e", "fig4f"];

/// Every preset name accepted by [`preset`].
pub const NAMES: [&str; 11] = [
    "fig4a",
    "fig4b",
    "fig4c",
    "fig4d",
    "fig4e",
    "fig4f",
    "motivating",
    "motivating-none",
    "tikhonov",
    "underdamped",
    "planar2r",
];

pub const STEP_TARGET: f64 = 0.01;
pub const LOW_GAINS: (f64, f64, f64) = (50.0, 10.0, 25.0);
pub const HIGH_GAINS: (f64, f64, f64) = (100.0, 20.0, 100.0);

fn single_link_base(name: &str, observer: ObserverConfig) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        plant: FjrParams::single_link(1.0, 1.0, 3000.0, FrictionModel::default()),
        controller: ControllerConfig {
            gains: PdGains::uniform(1, 50.0, 5.0),
            reference: Reference::Step {
                target: vec![STEP_TARGET],
                t_on: 0.0,
            },
        },
        observer,
        external: Vec::new(),
        duration: 10.0,
        dt: 1e-5,
        stride: 100,
        initial: InitialConditions::default(),
        seed: 0,
        bristle_update: BristleUpdate::Coupled,
        analysis: AnalysisConfig::default(),
        ideal_reference: true,
    }
}

fn observer(kind: ObserverKind, (l, l_p, l_i): (f64, f64, f64)) -> ObserverConfig {
    let gains = match kind {
        ObserverKind::Pid => ObserverGains::new(l, l_p, l_i),
        ObserverKind::Pd => ObserverGains::new(l, l_p, 0.0),
        ObserverKind::Baseline => ObserverGains::new(l, 0.0, 0.0),
        ObserverKind::None => ObserverGains::new(0.0, 0.0, 0.0),
    };
    ObserverConfig { kind, gains }
}

/// One cell of the single-link regulation grid.
pub fn fig4(name: &str) -> Option<ScenarioConfig> {
    let (kind, gains) = match name {
        "fig4a" => (ObserverKind::Pid, LOW_GAINS),
        "fig4b" => (ObserverKind::Pd, LOW_GAINS),
        "fig4c" => (ObserverKind::Baseline, LOW_GAINS),
        "fig4d" => (ObserverKind::Pid, HIGH_GAINS),
        "fig4e" => (ObserverKind::Pd, HIGH_GAINS),
        "fig4f" => (ObserverKind::Baseline, HIGH_GAINS),
        _ => return None,
    };
    Some(single_link_base(name, observer(kind, gains)))
}

/// Sinusoidal tracking with the low PID gains; the gain sweep varies `L`.
pub fn tikhonov() -> ScenarioConfig {
    let mut cfg = single_link_base("tikhonov", observer(ObserverKind::Pid, LOW_GAINS));
    cfg.controller.reference = Reference::Sinusoid {
        amplitude: vec![STEP_TARGET],
        frequency: 0.5,
        offset: vec![0.0],
    };
    cfg
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    if let Some(cfg) = fig4(name) {
        return Some(cfg);
    }
    Some(match name {
        "motivating" => single_link_base(name, observer(ObserverKind::Pid, LOW_GAINS)),
        "motivating-none" => single_link_base(name, ObserverConfig::none()),
        "tikhonov" => tikhonov(),
        "underdamped" => {
            let mut cfg = single_link_base(name, observer(ObserverKind::Pid, LOW_GAINS));
            cfg.controller.gains = PdGains::uniform(1, 50.0, 2.0);
            cfg
        }
        "planar2r" => {
            let params = Planar2RParams::default();
            let mut cfg = single_link_base(name, observer(ObserverKind::Pid, HIGH_GAINS));
            cfg.plant = FjrParams {
                motor_inertia: vec![1.0, 1.0],
                joint_stiffness: vec![3000.0, 3000.0],
                link: LinkModel::Planar2R(params),
                friction: vec![FrictionModel::default(); 2],
            };
            cfg.controller = ControllerConfig {
                gains: PdGains::uniform(2, 200.0, 20.0),
                reference: Reference::Step {
                    target: vec![0.1, -0.1],
                    t_on: 0.0,
                },
            };
            // start at the gravity-loaded rest pose for the zero command
            let g = cfg.plant.link.gravity(&[0.0, 0.0]);
            cfg.initial.theta = Some(g.iter().map(|g| g / 3000.0).collect());
            cfg.duration = 5.0;
            cfg.analysis.oscillation_window = 2.0;
            cfg.analysis.transient = 2.0;
            cfg
        }
        _ => return None,
    })
}
