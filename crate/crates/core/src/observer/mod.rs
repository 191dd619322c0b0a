//! Model-free friction observers.
//!
//! A friction-free nominal motor model is driven by the measured joint
//! torque and the controller output:
//!
//! ```text
//! B theta_n'' + tau_j = tau_c
//! ```
//!
//! The friction estimate is a PID/PD/D law on the disagreement
//! `e_nr = theta_n - theta`:
//!
//! ```text
//! tau_f_hat = -B L (e_nr' + L_p e_nr + L_i int e_nr)
//! ```
//!
//! so the difference dynamics read `B e_nr'' = tau_f_hat - tau_f`.

mod analysis;

pub use analysis::*;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObserverError {
    #[error("invalid observer gains for {kind:?}: {reason}")]
    InvalidGains { kind: ObserverKind, reason: String },
    #[error("operation not defined for observer kind {0:?}")]
    UnsupportedKind(ObserverKind),
    #[error("non-finite observer input: {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: expected {expected} joints, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid transfer function: {0}")]
    InvalidTransferFunction(String),
    #[error("frequency grid must be strictly positive, got {0}")]
    NonPositiveFrequency(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverKind {
    /// `C(s) = -BL (s + L_p + L_i/s)`, nominal feedback.
    #[serde(alias = "pid_type")]
    Pid,
    /// `C(s) = -BL (s + L_p)`, nominal feedback.
    #[serde(alias = "pd_type")]
    Pd,
    /// `C(s) = -BL s` with the controller closed on measured motor signals.
    #[serde(alias = "baseline_measured_feedback")]
    Baseline,
    /// No friction compensation.
    None,
}

impl ObserverKind {
    /// Whether the controller is fed the nominal motor state.
    pub fn feeds_nominal(self) -> bool {
        matches!(self, ObserverKind::Pid | ObserverKind::Pd)
    }

    pub fn has_integral(self) -> bool {
        self == ObserverKind::Pid
    }
}

/// Scalar observer gains shared by all joints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverGains {
    /// Primary gain `L` [1/s].
    #[serde(rename = "L", alias = "l")]
    pub l: f64,
    /// Proportional gain `L_p` [1/s].
    #[serde(rename = "L_p", alias = "l_p")]
    pub l_p: f64,
    /// Integral gain `L_i` [1/s^2].
    #[serde(rename = "L_i", alias = "l_i")]
    pub l_i: f64,
}

impl ObserverGains {
    pub fn new(l: f64, l_p: f64, l_i: f64) -> Self {
        Self { l, l_p, l_i }
    }

    pub fn validate(&self, kind: ObserverKind) -> Result<(), ObserverError> {
        let fail = |reason: &str| {
            Err(ObserverError::InvalidGains {
                kind,
                reason: reason.to_string(),
            })
        };
        if kind == ObserverKind::None {
            return Ok(());
        }
        if ![self.l, self.l_p, self.l_i].iter().all(|g| g.is_finite()) {
            return fail("gains must be finite");
        }
        if self.l <= 0.0 {
            return fail("L must be > 0");
        }
        match kind {
            ObserverKind::Pid => {
                if self.l_p <= 0.0 || self.l_i <= 0.0 {
                    return fail("L_p and L_i must be > 0");
                }
                if self.l_p * self.l_p <= 2.0 * self.l_i {
                    return fail("requires L_p^2 > 2 L_i");
                }
            }
            ObserverKind::Pd => {
                if self.l_p <= 0.0 {
                    return fail("L_p must be > 0");
                }
                if self.l_i != 0.0 {
                    return fail("L_i must be 0");
                }
            }
            ObserverKind::Baseline => {
                if self.l_p != 0.0 || self.l_i != 0.0 {
                    return fail("L_p and L_i must be 0");
                }
            }
            ObserverKind::None => {}
        }
        Ok(())
    }
}

/// Nominal motor state and integral of the disagreement, per joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverState {
    pub theta_n: Vec<f64>,
    pub theta_n_dot: Vec<f64>,
    /// `int e_nr`; stays zero for kinds without integral action.
    pub i_enr: Vec<f64>,
}

impl ObserverState {
    /// Start in agreement with the measured motor: `e_nr(0) = 0`.
    pub fn aligned(theta: &[f64], theta_dot: &[f64]) -> Self {
        Self {
            theta_n: theta.to_vec(),
            theta_n_dot: theta_dot.to_vec(),
            i_enr: vec![0.0; theta.len()],
        }
    }
}

/// `theta_n'' = B^-1 (tau_c - tau_j)`.
pub fn nominal_motor_derivative(tau_j: f64, tau_c: f64, b: f64) -> Result<f64, ObserverError> {
    if !(tau_j.is_finite() && tau_c.is_finite() && b.is_finite()) {
        return Err(ObserverError::NonFinite("nominal motor input"));
    }
    Ok((tau_c - tau_j) / b)
}

/// Scalar estimate law for one joint, given the disagreement state.
#[inline]
pub fn estimate_from_error(
    e: f64,
    e_dot: f64,
    i_e: f64,
    gains: &ObserverGains,
    kind: ObserverKind,
    b: f64,
) -> f64 {
    let r = b * gains.l;
    match kind {
        ObserverKind::Pid => -r * (e_dot + gains.l_p * e + gains.l_i * i_e),
        ObserverKind::Pd => -r * (e_dot + gains.l_p * e),
        ObserverKind::Baseline => -r * e_dot,
        ObserverKind::None => 0.0,
    }
}

/// Friction estimate for every joint from observer and measured motor state.
pub fn friction_estimate(
    o: &ObserverState,
    theta: &[f64],
    theta_dot: &[f64],
    gains: &ObserverGains,
    kind: ObserverKind,
    b: &[f64],
) -> Result<Vec<f64>, ObserverError> {
    let n = o.theta_n.len();
    for len in [
        o.theta_n_dot.len(),
        o.i_enr.len(),
        theta.len(),
        theta_dot.len(),
        b.len(),
    ] {
        if len != n {
            return Err(ObserverError::DimensionMismatch {
                expected: n,
                got: len,
            });
        }
    }
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    if !(finite(&o.theta_n)
        && finite(&o.theta_n_dot)
        && finite(&o.i_enr)
        && finite(theta)
        && finite(theta_dot))
    {
        return Err(ObserverError::NonFinite("observer state"));
    }
    Ok((0..n)
        .map(|i| {
            let e = o.theta_n[i] - theta[i];
            let e_dot = o.theta_n_dot[i] - theta_dot[i];
            estimate_from_error(e, e_dot, o.i_enr[i], gains, kind, b[i])
        })
        .collect())
}

/// Predicted rest values of the disagreement state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPrediction {
    pub e_nr: f64,
    /// `None` for observers without integral action.
    pub i_enr: Option<f64>,
}

/// Rest point of the difference dynamics for a steady friction level.
///
/// `resisting_friction` is the friction model's own output (positive when it
/// resists positive motion), i.e. the negative of the torque entering the motor
/// equation. In that convention the PID rest point is
/// `e_nr = 0, int e_nr = tau / (L_i L B)` and the PD rest point is
/// `e_nr = tau / (L_p L B)`.
pub fn equilibrium_prediction(
    b: f64,
    gains: &ObserverGains,
    kind: ObserverKind,
    resisting_friction: f64,
) -> Result<EquilibriumPrediction, ObserverError> {
    let zero_gain = |reason: &str| ObserverError::InvalidGains {
        kind,
        reason: reason.to_string(),
    };
    if b == 0.0 || gains.l == 0.0 {
        return Err(zero_gain("B and L must be nonzero"));
    }
    match kind {
        ObserverKind::Pid => {
            if gains.l_i == 0.0 {
                return Err(zero_gain("L_i must be nonzero"));
            }
            Ok(EquilibriumPrediction {
                e_nr: 0.0,
                i_enr: Some(resisting_friction / (gains.l_i * gains.l * b)),
            })
        }
        ObserverKind::Pd => {
            if gains.l_p == 0.0 {
                return Err(zero_gain("L_p must be nonzero"));
            }
            Ok(EquilibriumPrediction {
                e_nr: resisting_friction / (gains.l_p * gains.l * b),
                i_enr: None,
            })
        }
        other => Err(ObserverError::UnsupportedKind(other)),
    }
}
