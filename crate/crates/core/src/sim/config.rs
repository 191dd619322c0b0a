use serde::{Deserialize, Serialize};

use super::SimError;
use crate::control::{PdGains, Reference};
use crate::observer::{ObserverGains, ObserverKind};
use crate::plant::FjrParams;

/// Largest step accepted when a stiff LuGre law (`sigma0 >= 1e4`) is active.
pub const STIFF_DT_LIMIT: f64 = 2e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub gains: PdGains,
    pub reference: Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    pub kind: ObserverKind,
    pub gains: ObserverGains,
}

impl ObserverConfig {
    pub fn none() -> Self {
        Self {
            kind: ObserverKind::None,
            gains: ObserverGains::new(0.0, 0.0, 0.0),
        }
    }
}

/// Constant external link torque on one joint over `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorquePulse {
    pub joint: usize,
    pub start: f64,
    pub end: f64,
    pub torque: f64,
}

/// How the bristle state is advanced inside a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BristleUpdate {
    /// `z` is part of the RK4 state.
    #[default]
    Coupled,
    /// `z` is frozen at the step start and advanced by a backward-Euler
    /// update at every RK4 stage, then committed with the end-of-step velocity.
    SemiImplicit,
}

/// Initial plant state; the observer starts aligned unless overridden.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConditions {
    pub q: Option<Vec<f64>>,
    pub qd: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
    pub theta_dot: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
    pub theta_n: Option<Vec<f64>>,
    pub theta_n_dot: Option<Vec<f64>>,
    pub i_enr: Option<Vec<f64>>,
}

/// Trailing-window settings used by the trace diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Peak-to-peak window for oscillation detection [s].
    pub oscillation_window: f64,
    /// Peak-to-peak amplitude above which motion counts as oscillatory [m].
    pub oscillation_threshold: f64,
    /// Averaging window for steady-state quantities [s].
    pub steady_window: f64,
    /// Start of the post-transient window for tracking errors [s].
    pub transient: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            oscillation_window: 5.0,
            oscillation_threshold: 1e-4,
            steady_window: 1.0,
            transient: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub plant: FjrParams,
    pub controller: ControllerConfig,
    pub observer: ObserverConfig,
    #[serde(default)]
    pub external: Vec<TorquePulse>,
    /// [s]
    pub duration: f64,
    /// [s]
    pub dt: f64,
    /// Integration steps between recorded samples.
    pub stride: usize,
    #[serde(default)]
    pub initial: InitialConditions,
    /// Recorded for reproducibility; no built-in scenario draws random numbers.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bristle_update: BristleUpdate,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    /// Also run the friction-free, observer-free twin for `theta_ideal`.
    #[serde(default = "default_true")]
    pub ideal_reference: bool,
}

fn default_true() -> bool {
    true
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::InvalidConfig(msg.into())
}

impl ScenarioConfig {
    pub fn dof(&self) -> usize {
        self.plant.dof()
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Time between recorded samples.
    pub fn sample_period(&self) -> f64 {
        self.dt * self.stride as f64
    }

    /// Change the step size while keeping the sampling period when it is an
    /// integer multiple of the new step.
    pub fn with_dt(mut self, dt: f64) -> Self {
        let period = self.sample_period();
        let stride = (period / dt).round();
        if stride >= 1.0 && ((stride * dt - period).abs() <= 1e-9 * period) {
            self.stride = stride as usize;
        }
        self.dt = dt;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.dof();
        self.plant
            .validate()
            .map_err(|e| invalid(format!("plant: {e}")))?;
        self.controller
            .gains
            .validate(n)
            .map_err(|e| invalid(format!("controller.gains: {e}")))?;
        self.controller
            .reference
            .validate(n)
            .map_err(|e| invalid(format!("controller.reference: {e}")))?;
        self.observer
            .gains
            .validate(self.observer.kind)
            .map_err(|e| invalid(format!("observer: {e}")))?;
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(invalid(format!(
                "duration must be > 0, got {}",
                self.duration
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.dt > self.duration {
            return Err(invalid("dt exceeds duration"));
        }
        if self.stride == 0 {
            return Err(invalid("stride must be >= 1"));
        }
        let stiff = self
            .plant
            .friction
            .iter()
            .any(|f| f.lugre().is_some_and(|p| p.sigma0 >= 1e4));
        if stiff && self.dt > STIFF_DT_LIMIT {
            return Err(invalid(format!(
                "dt = {} exceeds {STIFF_DT_LIMIT} with a stiff bristle model",
                self.dt
            )));
        }
        for p in &self.external {
            if p.joint >= n {
                return Err(invalid(format!(
                    "external torque joint {} out of range",
                    p.joint
                )));
            }
            if !(p.start.is_finite()
                && p.end.is_finite()
                && p.torque.is_finite()
                && p.end >= p.start)
            {
                return Err(invalid(
                    "external torque pulse must be finite with end >= start",
                ));
            }
        }
        let ic = &self.initial;
        for (name, v) in [
            ("q", &ic.q),
            ("qd", &ic.qd),
            ("theta", &ic.theta),
            ("theta_dot", &ic.theta_dot),
            ("z", &ic.z),
            ("theta_n", &ic.theta_n),
            ("theta_n_dot", &ic.theta_n_dot),
            ("i_enr", &ic.i_enr),
        ] {
            if let Some(v) = v {
                if v.len() != n || v.iter().any(|x| !x.is_finite()) {
                    return Err(invalid(format!(
                        "initial.{name} must hold {n} finite values"
                    )));
                }
            }
        }
        let a = &self.analysis;
        if [
            a.oscillation_window,
            a.oscillation_threshold,
            a.steady_window,
        ]
        .iter()
        .any(|x| !(x.is_finite() && *x > 0.0))
            || !(a.transient.is_finite() && a.transient >= 0.0)
        {
            return Err(invalid("analysis windows and threshold must be positive"));
        }
        Ok(())
    }
}
