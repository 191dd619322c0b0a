//! Flexible-joint robot plant.
//!
//! ```text
//! M(q) q'' + C(q, q') q' + g(q) = tau_j + tau_ext
//! B theta''               + tau_j = tau_m + tau_f
//!                           tau_j = K_j (theta - q)
//! ```
//!
//! `B` and `K_j` are diagonal and stored per joint. Friction acts on the motor
//! side only.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::friction::{FrictionError, FrictionModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("invalid plant parameter: {0}")]
    InvalidParams(String),
    #[error("non-finite plant input: {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Friction(#[from] FrictionError),
}

fn check_len(what: &'static str, got: usize, expected: usize) -> Result<(), PlantError> {
    if got == expected {
        Ok(())
    } else {
        Err(PlantError::DimensionMismatch {
            what,
            got,
            expected,
        })
    }
}

/// Two-link planar arm in the vertical plane (gravity along -y when `q = 0`
/// points along +x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Planar2RParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    /// Distance from joint to link center of mass.
    pub lc1: f64,
    pub lc2: f64,
    /// Link inertia about the center of mass.
    pub i1: f64,
    pub i2: f64,
    pub gravity: f64,
}

impl Default for Planar2RParams {
    fn default() -> Self {
        Self {
            m1: 1.0,
            m2: 1.0,
            l1: 0.5,
            l2: 0.5,
            lc1: 0.25,
            lc2: 0.25,
            i1: 1.0 / 48.0,
            i2: 1.0 / 48.0,
            gravity: 9.81,
        }
    }
}

/// `(M(q), C(q, q') q', g(q))` in closed form.
pub fn planar2r_terms(
    q: [f64; 2],
    qd: [f64; 2],
    p: &Planar2RParams,
) -> (Matrix2<f64>, Vector2<f64>, Vector2<f64>) {
    let m = planar2r_mass(q, p);
    let c = planar2r_coriolis(q, qd, p);
    let g = planar2r_gravity(q, p);
    (m, c * Vector2::new(qd[0], qd[1]), g)
}

pub fn planar2r_mass(q: [f64; 2], p: &Planar2RParams) -> Matrix2<f64> {
    let c2 = q[1].cos();
    let m22 = p.m2 * p.lc2 * p.lc2 + p.i2;
    let m12 = m22 + p.m2 * p.l1 * p.lc2 * c2;
    let m11 = p.m1 * p.lc1 * p.lc1
        + p.i1
        + p.m2 * (p.l1 * p.l1 + p.lc2 * p.lc2 + 2.0 * p.l1 * p.lc2 * c2)
        + p.i2;
    Matrix2::new(m11, m12, m12, m22)
}

/// Christoffel-consistent Coriolis matrix, so that `M' - 2C` is skew.
pub fn planar2r_coriolis(q: [f64; 2], qd: [f64; 2], p: &Planar2RParams) -> Matrix2<f64> {
    let h = p.m2 * p.l1 * p.lc2 * q[1].sin();
    Matrix2::new(-h * qd[1], -h * (qd[0] + qd[1]), h * qd[0], 0.0)
}

pub fn planar2r_gravity(q: [f64; 2], p: &Planar2RParams) -> Vector2<f64> {
    let c1 = q[0].cos();
    let c12 = (q[0] + q[1]).cos();
    Vector2::new(
        (p.m1 * p.lc1 + p.m2 * p.l1) * p.gravity * c1 + p.m2 * p.lc2 * p.gravity * c12,
        p.m2 * p.lc2 * p.gravity * c12,
    )
}

fn planar2r_potential(q: [f64; 2], p: &Planar2RParams) -> f64 {
    (p.m1 * p.lc1 + p.m2 * p.l1) * p.gravity * q[0].sin()
        + p.m2 * p.lc2 * p.gravity * (q[0] + q[1]).sin()
}

/// Link-side rigid-body model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum LinkModel {
    /// One translational or rotational DOF, no gravity, no Coriolis terms.
    PointMass {
        mass: f64,
    },
    Planar2R(Planar2RParams),
}

impl LinkModel {
    pub fn dof(&self) -> usize {
        match self {
            LinkModel::PointMass { .. } => 1,
            LinkModel::Planar2R(_) => 2,
        }
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        match self {
            LinkModel::PointMass { mass } => {
                if !(mass.is_finite() && *mass > 0.0) {
                    return Err(PlantError::InvalidParams(format!(
                        "point mass must be positive, got {mass}"
                    )));
                }
            }
            LinkModel::Planar2R(p) => {
                let positive = [p.m1, p.m2, p.l1, p.l2];
                let nonneg = [p.lc1, p.lc2, p.i1, p.i2, p.gravity];
                if positive.iter().any(|x| !(x.is_finite() && *x > 0.0))
                    || nonneg.iter().any(|x| !(x.is_finite() && *x >= 0.0))
                {
                    return Err(PlantError::InvalidParams(
                        "planar 2R masses and lengths must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn gravity(&self, q: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; q.len()];
        self.gravity_into(q, &mut g);
        g
    }

    #[inline]
    pub fn gravity_into(&self, q: &[f64], out: &mut [f64]) {
        match self {
            LinkModel::PointMass { .. } => out.iter_mut().for_each(|g| *g = 0.0),
            LinkModel::Planar2R(p) => {
                let g = planar2r_gravity([q[0], q[1]], p);
                out[0] = g[0];
                out[1] = g[1];
            }
        }
    }

    pub fn has_gravity(&self) -> bool {
        matches!(self, LinkModel::Planar2R(p) if p.gravity != 0.0)
    }

    pub fn mass_matrix(&self, q: &[f64]) -> nalgebra::DMatrix<f64> {
        match self {
            LinkModel::PointMass { mass } => nalgebra::DMatrix::from_element(1, 1, *mass),
            LinkModel::Planar2R(p) => {
                let m = planar2r_mass([q[0], q[1]], p);
                nalgebra::DMatrix::from_column_slice(2, 2, m.as_slice())
            }
        }
    }

    /// `qdd = M(q)^-1 (tau - C q' - g)`; no allocation.
    #[inline]
    pub fn forward_dynamics(&self, q: &[f64], qd: &[f64], tau: &[f64], qdd: &mut [f64]) {
        match self {
            LinkModel::PointMass { mass } => qdd[0] = tau[0] / mass,
            LinkModel::Planar2R(p) => {
                let (m, cqd, g) = planar2r_terms([q[0], q[1]], [qd[0], qd[1]], p);
                let rhs0 = tau[0] - cqd[0] - g[0];
                let rhs1 = tau[1] - cqd[1] - g[1];
                let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
                qdd[0] = (m[(1, 1)] * rhs0 - m[(0, 1)] * rhs1) / det;
                qdd[1] = (m[(0, 0)] * rhs1 - m[(1, 0)] * rhs0) / det;
            }
        }
    }

    /// Kinetic plus gravitational potential energy of the links.
    pub fn energy(&self, q: &[f64], qd: &[f64]) -> f64 {
        match self {
            LinkModel::PointMass { mass } => 0.5 * mass * qd[0] * qd[0],
            LinkModel::Planar2R(p) => {
                let m = planar2r_mass([q[0], q[1]], p);
                let v = Vector2::new(qd[0], qd[1]);
                0.5 * v.dot(&(m * v)) + planar2r_potential([q[0], q[1]], p)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FjrParams {
    /// Diagonal of `B`.
    pub motor_inertia: Vec<f64>,
    /// Diagonal of `K_j`.
    pub joint_stiffness: Vec<f64>,
    pub link: LinkModel,
    /// One friction law per motor.
    pub friction: Vec<FrictionModel>,
}

impl FjrParams {
    /// Gravity-free single joint with the given motor friction.
    pub fn single_link(b: f64, m: f64, kj: f64, friction: FrictionModel) -> Self {
        Self {
            motor_inertia: vec![b],
            joint_stiffness: vec![kj],
            link: LinkModel::PointMass { mass: m },
            friction: vec![friction],
        }
    }

    pub fn dof(&self) -> usize {
        self.link.dof()
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let n = self.dof();
        self.link.validate()?;
        check_len("motor_inertia", self.motor_inertia.len(), n)?;
        check_len("joint_stiffness", self.joint_stiffness.len(), n)?;
        check_len("friction", self.friction.len(), n)?;
        if self
            .motor_inertia
            .iter()
            .chain(&self.joint_stiffness)
            .any(|x| !(x.is_finite() && *x > 0.0))
        {
            return Err(PlantError::InvalidParams(
                "motor inertia and joint stiffness must be positive".into(),
            ));
        }
        for f in &self.friction {
            f.validate()?;
        }
        Ok(())
    }

    /// Same plant with every motor made friction-free.
    pub fn without_friction(&self) -> Self {
        Self {
            friction: vec![FrictionModel::FrictionFree; self.dof()],
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub theta: Vec<f64>,
    pub theta_dot: Vec<f64>,
    /// LuGre bristle deflection per motor; stays zero for friction-free motors.
    pub z: Vec<f64>,
}

impl PlantState {
    pub fn zeros(n: usize) -> Self {
        Self {
            q: vec![0.0; n],
            qd: vec![0.0; n],
            theta: vec![0.0; n],
            theta_dot: vec![0.0; n],
            z: vec![0.0; n],
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.q, &self.qd, &self.theta, &self.theta_dot, &self.z]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantRates {
    pub qdd: Vec<f64>,
    pub theta_ddot: Vec<f64>,
    pub zdot: Vec<f64>,
    /// Friction torque acting on the motor (`+tau_f` in the motor equation).
    pub tau_f: Vec<f64>,
    pub tau_j: Vec<f64>,
}

/// `tau_j = K_j (theta - q)`.
pub fn joint_torque(theta: &[f64], q: &[f64], kj: &[f64]) -> Result<Vec<f64>, PlantError> {
    check_len("q", q.len(), theta.len())?;
    check_len("joint_stiffness", kj.len(), theta.len())?;
    Ok(theta
        .iter()
        .zip(q)
        .zip(kj)
        .map(|((t, q), k)| k * (t - q))
        .collect())
}

/// Motor-side friction torque in the motor equation's convention.
///
/// This is the one place where the friction model's resisting force is
/// negated: `tau_f = -F(z, theta_dot)`.
#[inline]
pub fn motor_friction(model: &FrictionModel, z: f64, theta_dot: f64) -> (f64, f64) {
    let (force, zdot) = model.evaluate(z, theta_dot);
    (-force, zdot)
}

/// Continuous-time plant rates.
pub fn plant_derivatives(
    s: &PlantState,
    tau_m: &[f64],
    tau_ext: &[f64],
    p: &FjrParams,
) -> Result<PlantRates, PlantError> {
    let n = p.dof();
    for (what, v) in [
        ("q", &s.q),
        ("qd", &s.qd),
        ("theta", &s.theta),
        ("theta_dot", &s.theta_dot),
        ("z", &s.z),
    ] {
        check_len(what, v.len(), n)?;
    }
    check_len("tau_m", tau_m.len(), n)?;
    check_len("tau_ext", tau_ext.len(), n)?;
    if !s.is_finite() {
        return Err(PlantError::NonFinite("state"));
    }
    if tau_m.iter().chain(tau_ext).any(|x| !x.is_finite()) {
        return Err(PlantError::NonFinite("torque input"));
    }

    let tau_j = joint_torque(&s.theta, &s.q, &p.joint_stiffness)?;
    let link_torque: Vec<f64> = tau_j.iter().zip(tau_ext).map(|(a, b)| a + b).collect();
    let mut qdd = vec![0.0; n];
    p.link.forward_dynamics(&s.q, &s.qd, &link_torque, &mut qdd);

    let mut theta_ddot = vec![0.0; n];
    let mut zdot = vec![0.0; n];
    let mut tau_f = vec![0.0; n];
    for i in 0..n {
        let (f, zd) = motor_friction(&p.friction[i], s.z[i], s.theta_dot[i]);
        tau_f[i] = f;
        zdot[i] = zd;
        theta_ddot[i] = (tau_m[i] + f - tau_j[i]) / p.motor_inertia[i];
    }
    Ok(PlantRates {
        qdd,
        theta_ddot,
        zdot,
        tau_f,
        tau_j,
    })
}

/// Link energy plus motor kinetic energy plus spring energy.
pub fn mechanical_energy(p: &FjrParams, s: &PlantState) -> f64 {
    let mut e = p.link.energy(&s.q, &s.qd);
    for i in 0..p.dof() {
        let d = s.theta[i] - s.q[i];
        e += 0.5 * p.motor_inertia[i] * s.theta_dot[i] * s.theta_dot[i]
            + 0.5 * p.joint_stiffness[i] * d * d;
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::friction::LuGreParams;
    use crate::ode::Rk4;
    use std::convert::Infallible;

    fn two_r() -> Planar2RParams {
        Planar2RParams::default()
    }

    #[test]
    fn joint_torque_values() {
        assert_eq!(joint_torque(&[0.2], &[0.2], &[3000.0]).unwrap(), vec![0.0]);
        let t = joint_torque(&[0.001], &[0.0], &[3000.0]).unwrap();
        assert!((t[0] - 3.0).abs() < 1e-12);
        let t = joint_torque(&[0.01], &[0.0], &[3000.0]).unwrap();
        assert!((t[0] - 30.0).abs() < 1e-12);
        assert!(matches!(
            joint_torque(&[0.0, 1.0], &[0.0], &[1.0, 1.0]),
            Err(PlantError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_state_is_equilibrium() {
        let p = FjrParams::single_link(
            1.0,
            1.0,
            3000.0,
            FrictionModel::LuGre(LuGreParams::default()),
        );
        let r = plant_derivatives(&PlantState::zeros(1), &[0.0], &[0.0], &p).unwrap();
        assert_eq!(r.qdd, vec![0.0]);
        assert_eq!(r.theta_ddot, vec![0.0]);
        assert_eq!(r.zdot, vec![0.0]);
    }

    #[test]
    fn friction_free_motor_is_decoupled_at_rest() {
        let p = FjrParams::single_link(1.0, 1.0, 3000.0, FrictionModel::FrictionFree);
        let r = plant_derivatives(&PlantState::zeros(1), &[1.0], &[0.0], &p).unwrap();
        assert_eq!(r.theta_ddot, vec![1.0]);
        assert_eq!(r.qdd, vec![0.0]);
    }

    #[test]
    fn rejects_non_finite_and_bad_dims() {
        let p = FjrParams::single_link(1.0, 1.0, 3000.0, FrictionModel::FrictionFree);
        let mut s = PlantState::zeros(1);
        s.qd[0] = f64::NAN;
        assert!(matches!(
            plant_derivatives(&s, &[0.0], &[0.0], &p),
            Err(PlantError::NonFinite(_))
        ));
        let s = PlantState::zeros(1);
        assert!(matches!(
            plant_derivatives(&s, &[0.0, 1.0], &[0.0], &p),
            Err(PlantError::DimensionMismatch { .. })
        ));
    }

    /// Constant 0.5 N on the motor, below the 1.5 N stiction level.
    #[test]
    fn stiction_holds_subcritical_motor_torque() {
        let p = FjrParams::single_link(
            1.0,
            1.0,
            3000.0,
            FrictionModel::LuGre(LuGreParams::default()),
        );
        let dt = 1e-5;
        let mut rk = Rk4::new(5);
        let mut x = [0.0; 5];
        let mut max_disp: f64 = 0.0;
        for k in 0..100_000 {
            rk.step(k as f64 * dt, dt, &mut x, |_, y, d| {
                let s = PlantState {
                    q: vec![y[0]],
                    qd: vec![y[1]],
                    theta: vec![y[2]],
                    theta_dot: vec![y[3]],
                    z: vec![y[4]],
                };
                let r = plant_derivatives(&s, &[0.5], &[0.0], &p).unwrap();
                d.copy_from_slice(&[y[1], r.qdd[0], y[3], r.theta_ddot[0], r.zdot[0]]);
                Ok::<_, Infallible>(())
            })
            .unwrap();
            max_disp = max_disp.max(x[2].abs());
        }
        assert!(max_disp < 1e-5, "motor moved {max_disp}");
    }

    #[test]
    fn planar2r_basic_terms() {
        let p = two_r();
        let (_, cqd, _) = planar2r_terms([0.3, -0.7], [0.0, 0.0], &p);
        assert_eq!(cqd, Vector2::zeros());
        let flat = Planar2RParams { gravity: 0.0, ..p };
        for q in [[0.0, 0.0], [1.0, 2.0], [-0.4, 3.0]] {
            assert_eq!(planar2r_gravity(q, &flat), Vector2::zeros());
            let m = planar2r_mass(q, &p);
            assert_eq!(m[(0, 1)], m[(1, 0)]);
            assert!(m.symmetric_eigenvalues().iter().all(|&l| l > 0.0));
        }
    }

    #[test]
    fn gravity_is_potential_gradient() {
        let p = two_r();
        let q = [0.4, -1.1];
        let h = 1e-6;
        let g = planar2r_gravity(q, &p);
        for j in 0..2 {
            let mut qp = q;
            let mut qm = q;
            qp[j] += h;
            qm[j] -= h;
            let fd = (planar2r_potential(qp, &p) - planar2r_potential(qm, &p)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6);
        }
    }

    /// Unforced friction-free FJR with 2R links conserves total energy.
    #[test]
    fn planar2r_energy_is_conserved() {
        let p = FjrParams {
            motor_inertia: vec![0.5, 0.5],
            joint_stiffness: vec![3000.0, 3000.0],
            link: LinkModel::Planar2R(two_r()),
            friction: vec![FrictionModel::FrictionFree; 2],
        };
        let unpack = |y: &[f64]| PlantState {
            q: y[0..2].to_vec(),
            qd: y[2..4].to_vec(),
            theta: y[4..6].to_vec(),
            theta_dot: y[6..8].to_vec(),
            z: vec![0.0; 2],
        };
        let mut x = [0.3, -0.2, 0.0, 0.0, 0.3, -0.2, 0.0, 0.0];
        let e0 = mechanical_energy(&p, &unpack(&x));
        let dt = 1e-4;
        let mut rk = Rk4::new(8);
        for k in 0..100_000 {
            rk.step(k as f64 * dt, dt, &mut x, |_, y, d| {
                let r = plant_derivatives(&unpack(y), &[0.0; 2], &[0.0; 2], &p).unwrap();
                d[0..2].copy_from_slice(&y[2..4]);
                d[2..4].copy_from_slice(&r.qdd);
                d[4..6].copy_from_slice(&y[6..8]);
                d[6..8].copy_from_slice(&r.theta_ddot);
                Ok::<_, Infallible>(())
            })
            .unwrap();
        }
        let e1 = mechanical_energy(&p, &unpack(&x));
        assert!(((e1 - e0) / e0).abs() <= 1e-5, "drift {}", (e1 - e0) / e0);
    }
}
