use super::config::{BristleUpdate, ScenarioConfig};
use super::trace::{Signal, SimTrace};
use super::SimError;
use crate::control::motor_pd;
use crate::friction::{lugre_g, lugre_step, FrictionModel, LuGreState};
use crate::observer::{estimate_from_error, ObserverKind, ObserverState};
use crate::ode::Rk4;
use crate::plant::PlantState;

/// Blocks of the flat state vector, each `n` long.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Q = 0,
    Qd,
    Theta,
    ThetaDot,
    ThetaN,
    ThetaNDot,
    IEnr,
    Z,
}

pub const BLOCKS: usize = 8;

/// Plant and observer state together.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub plant: PlantState,
    pub observer: ObserverState,
}

impl FullState {
    pub fn to_flat(&self) -> Vec<f64> {
        let p = &self.plant;
        let o = &self.observer;
        [
            &p.q,
            &p.qd,
            &p.theta,
            &p.theta_dot,
            &o.theta_n,
            &o.theta_n_dot,
            &o.i_enr,
            &p.z,
        ]
        .into_iter()
        .flat_map(|v| v.iter().copied())
        .collect()
    }

    pub fn from_flat(x: &[f64]) -> Self {
        let n = x.len() / BLOCKS;
        let b = |k: Block| x[k as usize * n..(k as usize + 1) * n].to_vec();
        Self {
            plant: PlantState {
                q: b(Block::Q),
                qd: b(Block::Qd),
                theta: b(Block::Theta),
                theta_dot: b(Block::ThetaDot),
                z: b(Block::Z),
            },
            observer: ObserverState {
                theta_n: b(Block::ThetaN),
                theta_n_dot: b(Block::ThetaNDot),
                i_enr: b(Block::IEnr),
            },
        }
    }
}

/// Algebraic signals evaluated alongside the rates.
#[derive(Debug, Clone)]
struct Scratch {
    q_d: Vec<f64>,
    q_d_dot: Vec<f64>,
    theta_d: Vec<f64>,
    g_qd: Vec<f64>,
    tau_j: Vec<f64>,
    link_tau: Vec<f64>,
    tau_ext: Vec<f64>,
    qdd: Vec<f64>,
    tau_c: Vec<f64>,
    tau_hat: Vec<f64>,
    tau_m: Vec<f64>,
    tau_f: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        let z = || vec![0.0; n];
        Self {
            q_d: z(),
            q_d_dot: z(),
            theta_d: z(),
            g_qd: z(),
            tau_j: z(),
            link_tau: z(),
            tau_ext: z(),
            qdd: z(),
            tau_c: z(),
            tau_hat: z(),
            tau_m: z(),
            tau_f: z(),
        }
    }
}

/// Coupled plant + observer + controller integrator for one scenario.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: ScenarioConfig,
    n: usize,
    rk: Rk4,
    ws: Scratch,
    /// Start of the current step, used by the semi-implicit bristle update.
    step_t0: f64,
    z0: Vec<f64>,
}

impl Simulator {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let n = cfg.dof();
        Ok(Self {
            n,
            rk: Rk4::new(BLOCKS * n),
            ws: Scratch::new(n),
            step_t0: 0.0,
            z0: vec![0.0; n],
            cfg,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn initial_state(&self) -> Vec<f64> {
        let n = self.n;
        let ic = &self.cfg.initial;
        let pick = |v: &Option<Vec<f64>>, d: &[f64]| v.clone().unwrap_or_else(|| d.to_vec());
        let zeros = vec![0.0; n];
        let theta = pick(&ic.theta, &zeros);
        let theta_dot = pick(&ic.theta_dot, &zeros);
        FullState {
            plant: PlantState {
                q: pick(&ic.q, &zeros),
                qd: pick(&ic.qd, &zeros),
                z: pick(&ic.z, &zeros),
                theta: theta.clone(),
                theta_dot: theta_dot.clone(),
            },
            observer: ObserverState {
                theta_n: pick(&ic.theta_n, &theta),
                theta_n_dot: pick(&ic.theta_n_dot, &theta_dot),
                i_enr: pick(&ic.i_enr, &zeros),
            },
        }
        .to_flat()
    }

    /// Advance the flat state from `t` to `t + dt`.
    pub fn integrate_step(&mut self, t: f64, x: &mut [f64]) -> Result<(), SimError> {
        let dt = self.cfg.dt;
        let n = self.n;
        let Self {
            cfg,
            rk,
            ws,
            step_t0,
            z0,
            ..
        } = self;
        *step_t0 = t;
        let zb = Block::Z as usize * n;
        z0.copy_from_slice(&x[zb..zb + n]);
        rk.step(t, dt, x, |ts, y, d| {
            rates(cfg, ws, *step_t0, z0, ts, y, d);
            Ok::<_, SimError>(())
        })?;
        if cfg.bristle_update == BristleUpdate::SemiImplicit {
            let v = Block::ThetaDot as usize * n;
            for i in 0..n {
                if let FrictionModel::LuGre(p) = &cfg.plant.friction[i] {
                    let (s, _) = lugre_step(LuGreState { z: z0[i] }, x[v + i], dt, p)
                        .map_err(|_| SimError::Diverged { t: t + dt })?;
                    x[zb + i] = s.z;
                }
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Diverged { t: t + dt });
        }
        Ok(())
    }

    /// Evaluate the rates at `(t, x)` into `dx`.
    pub fn derivatives(&mut self, t: f64, x: &[f64], dx: &mut [f64]) {
        let Self { cfg, ws, z0, .. } = self;
        let zb = Block::Z as usize * self.n;
        z0.copy_from_slice(&x[zb..zb + self.n]);
        rates(cfg, ws, t, z0, t, x, dx);
    }

    fn record(&mut self, t: f64, x: &[f64], trace: &mut SimTrace) {
        let n = self.n;
        let mut dx = vec![0.0; x.len()];
        self.derivatives(t, x, &mut dx);
        trace.t.push(t);
        let ws = &self.ws;
        let blk = |b: Block, i: usize| x[b as usize * n + i];
        for (i, jt) in trace.joints.iter_mut().enumerate() {
            let th = blk(Block::Theta, i);
            let thn = blk(Block::ThetaN, i);
            jt.push(Signal::Q, blk(Block::Q, i));
            jt.push(Signal::Qd, blk(Block::Qd, i));
            jt.push(Signal::Theta, th);
            jt.push(Signal::ThetaDot, blk(Block::ThetaDot, i));
            jt.push(Signal::ThetaN, thn);
            jt.push(Signal::ThetaNDot, blk(Block::ThetaNDot, i));
            jt.push(Signal::ENr, thn - th);
            jt.push(Signal::IEnr, blk(Block::IEnr, i));
            jt.push(Signal::TauJ, ws.tau_j[i]);
            jt.push(Signal::TauC, ws.tau_c[i]);
            jt.push(Signal::TauM, ws.tau_m[i]);
            jt.push(Signal::TauFHat, ws.tau_hat[i]);
            jt.push(Signal::TauFTrue, ws.tau_f[i]);
            jt.push(Signal::Z, blk(Block::Z, i));
            jt.push(Signal::TauExt, ws.tau_ext[i]);
            jt.push(Signal::ThetaD, ws.theta_d[i]);
        }
    }

    /// Integrate over the configured duration and record every `stride`
    /// steps, starting at `t = 0`. The ideal-position column is left empty.
    pub fn run(&mut self) -> Result<SimTrace, SimError> {
        let steps = self.cfg.steps();
        let stride = self.cfg.stride;
        let dt = self.cfg.dt;
        let mut x = self.initial_state();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Diverged { t: 0.0 });
        }
        let mut trace = SimTrace::new(self.n, self.cfg.sample_period(), steps / stride + 1);
        self.record(0.0, &x, &mut trace);
        for k in 0..steps {
            let t = k as f64 * dt;
            self.integrate_step(t, &mut x)?;
            if (k + 1) % stride == 0 {
                self.record((k + 1) as f64 * dt, &x, &mut trace);
            }
        }
        Ok(trace)
    }
}

/// Configuration of the friction-free, observer-free twin used for the ideal
/// motor position.
pub fn ideal_twin(cfg: &ScenarioConfig) -> ScenarioConfig {
    let mut twin = cfg.clone();
    twin.name = format!("{}-ideal", cfg.name);
    twin.plant = cfg.plant.without_friction();
    twin.observer = super::config::ObserverConfig::none();
    twin.ideal_reference = false;
    twin.initial.z = None;
    twin.initial.theta_n = None;
    twin.initial.theta_n_dot = None;
    twin.initial.i_enr = None;
    twin
}

/// Run a scenario and, when requested, its ideal twin for `theta_ideal`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimTrace, SimError> {
    let mut sim = Simulator::new(cfg.clone())?;
    if !cfg.ideal_reference {
        return sim.run();
    }
    let mut twin = Simulator::new(ideal_twin(cfg))?;
    let (main, ideal) = rayon::join(|| sim.run(), || twin.run());
    let mut trace = main?;
    let ideal = ideal?;
    for (jt, it) in trace.joints.iter_mut().zip(&ideal.joints) {
        jt.set(Signal::ThetaIdeal, it.get(Signal::Theta).to_vec());
    }
    Ok(trace)
}

#[inline]
fn rates(
    cfg: &ScenarioConfig,
    ws: &mut Scratch,
    t0: f64,
    z0: &[f64],
    t: f64,
    x: &[f64],
    dx: &mut [f64],
) {
    let n = cfg.dof();
    let blk = |b: Block| b as usize * n..(b as usize + 1) * n;
    let (q, qd) = (&x[blk(Block::Q)], &x[blk(Block::Qd)]);
    let (th, thd) = (&x[blk(Block::Theta)], &x[blk(Block::ThetaDot)]);
    let (thn, thnd) = (&x[blk(Block::ThetaN)], &x[blk(Block::ThetaNDot)]);
    let ie = &x[blk(Block::IEnr)];
    let z = &x[blk(Block::Z)];
    let plant = &cfg.plant;
    let kind = cfg.observer.kind;
    let gains = &cfg.observer.gains;

    cfg.controller
        .reference
        .sample(t, &mut ws.q_d, &mut ws.q_d_dot);
    if plant.link.has_gravity() {
        plant.link.gravity_into(&ws.q_d, &mut ws.g_qd);
        for i in 0..n {
            ws.theta_d[i] = ws.q_d[i] + ws.g_qd[i] / plant.joint_stiffness[i];
        }
    } else {
        ws.g_qd.iter_mut().for_each(|g| *g = 0.0);
        ws.theta_d.copy_from_slice(&ws.q_d);
    }

    ws.tau_ext.iter_mut().for_each(|v| *v = 0.0);
    for p in &cfg.external {
        if t >= p.start && t < p.end {
            ws.tau_ext[p.joint] += p.torque;
        }
    }
    for i in 0..n {
        ws.tau_j[i] = plant.joint_stiffness[i] * (th[i] - q[i]);
        ws.link_tau[i] = ws.tau_j[i] + ws.tau_ext[i];
    }
    plant
        .link
        .forward_dynamics(q, qd, &ws.link_tau, &mut ws.qdd);

    let (fb, fbd) = if kind.feeds_nominal() {
        (thn, thnd)
    } else {
        (th, thd)
    };
    motor_pd(
        fb,
        fbd,
        &ws.theta_d,
        &cfg.controller.gains,
        &ws.g_qd,
        &mut ws.tau_c,
    );

    let h = t - t0;
    for i in 0..n {
        let b = plant.motor_inertia[i];
        let e = thn[i] - th[i];
        ws.tau_hat[i] = estimate_from_error(e, thnd[i] - thd[i], ie[i], gains, kind, b);
        ws.tau_m[i] = ws.tau_c[i] - ws.tau_hat[i];

        let v = thd[i];
        let (force, zdot) = match (&plant.friction[i], cfg.bristle_update) {
            (FrictionModel::LuGre(p), BristleUpdate::SemiImplicit) => {
                let rate = p.sigma0 * v.abs() / lugre_g(v, p);
                let zdot = if h > 0.0 {
                    let zs = (z0[i] + h * v) / (1.0 + h * rate);
                    (zs - z0[i]) / h
                } else {
                    v - rate * z0[i]
                };
                let zs = z0[i] + h * zdot;
                (p.sigma0 * zs + p.sigma1 * zdot + p.sigma2 * v, 0.0)
            }
            (model, _) => model.evaluate(z[i], v),
        };
        ws.tau_f[i] = -force;

        dx[Block::Q as usize * n + i] = qd[i];
        dx[Block::Qd as usize * n + i] = ws.qdd[i];
        dx[Block::Theta as usize * n + i] = v;
        dx[Block::ThetaDot as usize * n + i] = (ws.tau_m[i] + ws.tau_f[i] - ws.tau_j[i]) / b;
        dx[Block::ThetaN as usize * n + i] = thnd[i];
        dx[Block::ThetaNDot as usize * n + i] = (ws.tau_c[i] - ws.tau_j[i]) / b;
        dx[Block::IEnr as usize * n + i] = if kind == ObserverKind::Pid { e } else { 0.0 };
        dx[Block::Z as usize * n + i] = zdot;
    }
}
