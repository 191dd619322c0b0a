//! Motor-side friction models.
//!
//! The LuGre model is written in its own sign convention: the returned force
//! `sigma0*z + sigma1*zdot + sigma2*v` *resists* motion (positive for positive
//! sliding velocity). The plant negates it when injecting it into the motor
//! equation; see [`crate::plant::plant_derivatives`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrictionError {
    #[error("invalid LuGre parameter: {0}")]
    InvalidParams(&'static str),
    #[error("non-finite input to friction step (v = {v}, dt = {dt})")]
    NonFinite { v: f64, dt: f64 },
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
}

/// LuGre coefficients. Units follow whatever the plant uses (N and m for the
/// single-link preset).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LuGreParams {
    /// Bristle stiffness.
    pub sigma0: f64,
    /// Bristle damping.
    pub sigma1: f64,
    /// Viscous coefficient.
    pub sigma2: f64,
    /// Coulomb level.
    pub f_c: f64,
    /// Stiction level.
    pub f_s: f64,
    /// Stribeck velocity.
    pub v_s: f64,
}

impl Default for LuGreParams {
    /// Canonical parameter set used by all single-link presets.
    fn default() -> Self {
        Self {
            sigma0: 1e5,
            sigma1: 1e5_f64.sqrt(),
            sigma2: 0.4,
            f_c: 1.0,
            f_s: 1.5,
            v_s: 0.001,
        }
    }
}

impl LuGreParams {
    pub fn validate(&self) -> Result<(), FrictionError> {
        let all = [
            self.sigma0,
            self.sigma1,
            self.sigma2,
            self.f_c,
            self.f_s,
            self.v_s,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(FrictionError::InvalidParams(
                "all coefficients must be finite",
            ));
        }
        if self.sigma0 <= 0.0 {
            return Err(FrictionError::InvalidParams("sigma0 must be > 0"));
        }
        if self.sigma1 < 0.0 {
            return Err(FrictionError::InvalidParams("sigma1 must be >= 0"));
        }
        if self.sigma2 < 0.0 {
            return Err(FrictionError::InvalidParams("sigma2 must be >= 0"));
        }
        if self.f_c <= 0.0 {
            return Err(FrictionError::InvalidParams("f_c must be > 0"));
        }
        if self.f_s < self.f_c {
            return Err(FrictionError::InvalidParams("f_s must be >= f_c"));
        }
        if self.v_s <= 0.0 {
            return Err(FrictionError::InvalidParams("v_s must be > 0"));
        }
        Ok(())
    }

    /// Largest bristle deflection reachable from rest: `f_s / sigma0`.
    pub fn max_deflection(&self) -> f64 {
        self.f_s / self.sigma0
    }

    /// Steady sliding force at constant velocity `v`: `sgn(v) g(v) + sigma2 v`.
    pub fn steady_sliding_force(&self, v: f64) -> f64 {
        if v == 0.0 {
            return 0.0;
        }
        v.signum() * lugre_g(v, self) + self.sigma2 * v
    }

    /// Bristle rate `zdot = v - sigma0 |v| z / g(v)`.
    #[inline]
    pub fn bristle_rate(&self, z: f64, v: f64) -> f64 {
        v - self.sigma0 * v.abs() / lugre_g(v, self) * z
    }

    /// Continuous-time LuGre force for bristle state `z` and velocity `v`.
    /// Returns `(force, zdot)`.
    #[inline]
    pub fn force(&self, z: f64, v: f64) -> (f64, f64) {
        let zdot = self.bristle_rate(z, v);
        (self.sigma0 * z + self.sigma1 * zdot + self.sigma2 * v, zdot)
    }
}

/// Stribeck curve `g(v) = f_c + (f_s - f_c) exp(-(v/v_s)^2)`.
#[inline]
pub fn lugre_g(v: f64, p: &LuGreParams) -> f64 {
    let r = v / p.v_s;
    p.f_c + (p.f_s - p.f_c) * (-r * r).exp()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LuGreState {
    /// Bristle deflection.
    pub z: f64,
}

/// Advance the bristle state by one step with `v` frozen over the step.
///
/// Backward Euler in `z`: `z' = (z + dt v) / (1 + dt sigma0 |v| / g(v))`, which
/// is unconditionally stable however stiff the bristle is. The returned force
/// uses `zdot = (z' - z) / dt` so that it is consistent with the update.
pub fn lugre_step(
    s: LuGreState,
    v: f64,
    dt: f64,
    p: &LuGreParams,
) -> Result<(LuGreState, f64), FrictionError> {
    if !v.is_finite() || !dt.is_finite() {
        return Err(FrictionError::NonFinite { v, dt });
    }
    if dt <= 0.0 {
        return Err(FrictionError::NonPositiveStep(dt));
    }
    let z_next = (s.z + dt * v) / (1.0 + dt * p.sigma0 * v.abs() / lugre_g(v, p));
    let zdot = (z_next - s.z) / dt;
    let force = p.sigma0 * z_next + p.sigma1 * zdot + p.sigma2 * v;
    Ok((LuGreState { z: z_next }, force))
}

/// Quasi-static breakaway level: a slowly ramped force below this value does
/// not produce sustained sliding.
pub fn breakaway_force(p: &LuGreParams) -> f64 {
    p.f_s
}

/// Push a point mass with a slowly increasing force `rate * t` against LuGre
/// friction and return the applied force at the instant the mass first
/// exceeds `v_threshold`. Returns `None` if that never happens within
/// `max_force / rate` seconds.
///
/// Independent of the plant module: the mass is advanced with semi-implicit
/// Euler and the bristle with [`lugre_step`].
pub fn force_ramp_breakaway(
    p: &LuGreParams,
    mass: f64,
    rate: f64,
    dt: f64,
    v_threshold: f64,
    max_force: f64,
) -> Option<f64> {
    let mut s = LuGreState::default();
    let mut v = 0.0;
    let steps = (max_force / rate / dt).ceil() as usize;
    for k in 0..steps {
        let applied = rate * (k as f64) * dt;
        let (next, force) = lugre_step(s, v, dt, p).ok()?;
        s = next;
        v += dt * (applied - force) / mass;
        if v.abs() > v_threshold {
            return Some(applied);
        }
    }
    None
}

/// A friction law attached to one motor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FrictionModel {
    LuGre(LuGreParams),
    /// Ideal motor: no friction, no internal state.
    FrictionFree,
}

impl Default for FrictionModel {
    fn default() -> Self {
        FrictionModel::LuGre(LuGreParams::default())
    }
}

impl FrictionModel {
    pub fn validate(&self) -> Result<(), FrictionError> {
        match self {
            FrictionModel::LuGre(p) => p.validate(),
            FrictionModel::FrictionFree => Ok(()),
        }
    }

    /// Whether the model carries a bristle state.
    pub fn has_state(&self) -> bool {
        matches!(self, FrictionModel::LuGre(_))
    }

    pub fn lugre(&self) -> Option<&LuGreParams> {
        match self {
            FrictionModel::LuGre(p) => Some(p),
            FrictionModel::FrictionFree => None,
        }
    }

    /// Continuous-time `(force, zdot)`; both zero for the friction-free model.
    #[inline]
    pub fn evaluate(&self, z: f64, v: f64) -> (f64, f64) {
        match self {
            FrictionModel::LuGre(p) => p.force(z, v),
            FrictionModel::FrictionFree => (0.0, 0.0),
        }
    }

    /// Discrete step; see [`lugre_step`].
    pub fn step(&self, s: LuGreState, v: f64, dt: f64) -> Result<(LuGreState, f64), FrictionError> {
        match self {
            FrictionModel::LuGre(p) => lugre_step(s, v, dt, p),
            FrictionModel::FrictionFree => {
                if !v.is_finite() || !dt.is_finite() {
                    return Err(FrictionError::NonFinite { v, dt });
                }
                Ok((LuGreState::default(), 0.0))
            }
        }
    }
}

/// Outcome of the linear-growth bound check `|F| <= a1 |v| + a2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundAudit {
    pub a1: f64,
    pub a2: f64,
    /// Largest `|F| / (a1 |v| + a2)` seen along the trace.
    pub worst_ratio: f64,
    pub worst_index: usize,
    /// `worst_ratio <= 1.01`.
    pub holds: bool,
}

/// Check the linear growth bound on a recorded `(v, F)` trace.
///
/// With `|z| <= f_s/sigma0` the bristle rate obeys `|zdot| <= |v| (1 + f_s/f_c)`,
/// so `a1 = sigma2 + sigma1 (1 + f_s/f_c)` and `a2 = f_s` bound the force.
pub fn friction_bound_audit(v: &[f64], force: &[f64], p: &LuGreParams) -> BoundAudit {
    let a1 = p.sigma2 + p.sigma1 * (1.0 + p.f_s / p.f_c);
    let a2 = p.f_s;
    let mut worst_ratio = 0.0;
    let mut worst_index = 0;
    for (i, (&vi, &fi)) in v.iter().zip(force).enumerate() {
        let ratio = fi.abs() / (a1 * vi.abs() + a2);
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_index = i;
        }
    }
    BoundAudit {
        a1,
        a2,
        worst_ratio,
        worst_index,
        holds: worst_ratio <= 1.01,
    }
}

/// Cumulative energy `E(t) = int v F dt` absorbed by the friction, by the
/// trapezoidal rule on a uniformly sampled trace. Passivity of `(v, -tau_f)`
/// means `E(t) >= -beta` with `beta = sigma0 z(0)^2 / 2`.
pub fn friction_passivity_audit(v: &[f64], force: &[f64], dt: f64) -> Vec<f64> {
    let mut energy = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    for i in 0..v.len().min(force.len()) {
        if i > 0 {
            acc += 0.5 * dt * (v[i - 1] * force[i - 1] + v[i] * force[i]);
        }
        energy.push(acc);
    }
    energy
}

/// Initial bristle storage `sigma0 z0^2 / 2`.
pub fn initial_storage(p: &LuGreParams, z0: f64) -> f64 {
    0.5 * p.sigma0 * z0 * z0
}
