//! Motor-side PD regulation and reference generation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::LinkModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid PD gains: {0}")]
    InvalidGains(String),
    #[error("invalid reference: {0}")]
    InvalidReference(String),
}

/// Diagonal PD gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdGains {
    pub kp: Vec<f64>,
    pub kd: Vec<f64>,
}

impl PdGains {
    pub fn uniform(n: usize, kp: f64, kd: f64) -> Self {
        Self {
            kp: vec![kp; n],
            kd: vec![kd; n],
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), ControlError> {
        if self.kp.len() != n || self.kd.len() != n {
            return Err(ControlError::InvalidGains(format!(
                "expected {n} entries, got kp={} kd={}",
                self.kp.len(),
                self.kd.len()
            )));
        }
        if self
            .kp
            .iter()
            .chain(&self.kd)
            .any(|g| !(g.is_finite() && *g > 0.0))
        {
            return Err(ControlError::InvalidGains(
                "kp and kd must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// Desired link position, per joint.
///
/// For gravity-free links the desired motor position equals the desired link
/// position; otherwise see [`theta_d_from_qd`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reference {
    /// Jump from zero to `target` at `t_on`.
    Step {
        target: Vec<f64>,
        t_on: f64,
    },
    Hold {
        target: Vec<f64>,
    },
    /// `offset + amplitude sin(2 pi frequency t)`.
    Sinusoid {
        amplitude: Vec<f64>,
        frequency: f64,
        offset: Vec<f64>,
    },
}

impl Reference {
    pub fn validate(&self, n: usize) -> Result<(), ControlError> {
        let lens: Vec<usize> = match self {
            Reference::Step { target, t_on } => {
                if !t_on.is_finite() {
                    return Err(ControlError::InvalidReference("t_on must be finite".into()));
                }
                vec![target.len()]
            }
            Reference::Hold { target } => vec![target.len()],
            Reference::Sinusoid {
                amplitude,
                frequency,
                offset,
            } => {
                if !(frequency.is_finite() && *frequency >= 0.0) {
                    return Err(ControlError::InvalidReference(
                        "frequency must be >= 0".into(),
                    ));
                }
                vec![amplitude.len(), offset.len()]
            }
        };
        if lens.iter().any(|&l| l != n) {
            return Err(ControlError::InvalidReference(format!(
                "expected {n} joints"
            )));
        }
        Ok(())
    }

    /// Whether the reference is constant once it has been applied.
    pub fn is_regulation(&self) -> bool {
        !matches!(self, Reference::Sinusoid { .. })
    }

    /// Desired position and velocity at `t`, written into `pos`/`vel`.
    #[inline]
    pub fn sample(&self, t: f64, pos: &mut [f64], vel: &mut [f64]) {
        match self {
            Reference::Step { target, t_on } => {
                let on = t >= *t_on;
                for i in 0..pos.len() {
                    pos[i] = if on { target[i] } else { 0.0 };
                    vel[i] = 0.0;
                }
            }
            Reference::Hold { target } => {
                pos.copy_from_slice(target);
                vel.iter_mut().for_each(|v| *v = 0.0);
            }
            Reference::Sinusoid {
                amplitude,
                frequency,
                offset,
            } => {
                let w = 2.0 * std::f64::consts::PI * frequency;
                let (s, c) = (w * t).sin_cos();
                for i in 0..pos.len() {
                    pos[i] = offset[i] + amplitude[i] * s;
                    vel[i] = amplitude[i] * w * c;
                }
            }
        }
    }
}

/// `theta_d = q_d + K_j^-1 g(q_d)`.
pub fn theta_d_from_qd(q_d: &[f64], kj: &[f64], link: &LinkModel) -> Vec<f64> {
    let g = link.gravity(q_d);
    q_d.iter()
        .zip(kj)
        .zip(g)
        .map(|((q, k), g)| q + g / k)
        .collect()
}

/// `tau_c = -K_p (theta_fb - theta_d) - K_d theta_dot_fb + g(q_d)`, written
/// into `out`. The feedback signals are the nominal motor states when an
/// observer with nominal feedback is active, the measured ones otherwise.
#[inline]
pub fn motor_pd(
    theta_fb: &[f64],
    theta_dot_fb: &[f64],
    theta_d: &[f64],
    gains: &PdGains,
    g_qd: &[f64],
    out: &mut [f64],
) {
    for i in 0..out.len() {
        out[i] =
            -gains.kp[i] * (theta_fb[i] - theta_d[i]) - gains.kd[i] * theta_dot_fb[i] + g_qd[i];
    }
}

/// `tau_m = tau_c - tau_f_hat`.
#[inline]
pub fn motor_command(tau_c: f64, tau_f_hat: f64) -> f64 {
    tau_c - tau_f_hat
}

/// Rough damping sufficiency check `K_d >= c3 / L`, where `c3` is a
/// user-supplied estimate of the viscous friction coefficient. Returns the
/// per-joint margin `K_d - c3 / L`; negative entries deserve a warning.
pub fn damping_margin(gains: &PdGains, c3: f64, observer_l: f64) -> Vec<f64> {
    gains.kd.iter().map(|kd| kd - c3 / observer_l).collect()
}
