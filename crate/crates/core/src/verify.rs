//! Self-check suites over the analytic utilities: Riccati identity, filter
//! equivalence, passivity of the estimate map and friction oracles.

use serde::{Deserialize, Serialize};

use crate::friction::{force_ramp_breakaway, lugre_step, LuGreParams, LuGreState};
use crate::observer::{
    compensator, compensator_from_lpf, equivalent_lpf, lpf_equivalence, observer_passivity_sweep,
    riccati_terms, ObserverGains, ObserverKind,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance rule, e.g. `<= 1e-9`.
    pub criterion: String,
    pub pass: bool,
}

fn check(suite: &str, name: String, value: f64, criterion: &str, pass: bool) -> Check {
    Check {
        suite: suite.to_string(),
        name,
        value,
        criterion: criterion.to_string(),
        pass,
    }
}

fn square_wave(dt: f64, duration: f64, period: f64, amplitude: f64) -> Vec<f64> {
    let n = (duration / dt).round() as usize;
    let half = (0.5 * period / dt).round() as usize;
    (0..n)
        .map(|k| {
            if (k / half).is_multiple_of(2) {
                amplitude
            } else {
                -amplitude
            }
        })
        .collect()
}

/// Gain sets on which the Riccati identity is checked: the two standard
/// sets plus a grid with `L_i` a fraction of the admissible `L_p^2 / 2`.
pub fn riccati_gain_grid() -> Vec<ObserverGains> {
    let mut out = vec![
        ObserverGains::new(50.0, 10.0, 25.0),
        ObserverGains::new(100.0, 20.0, 100.0),
    ];
    for l in [10.0, 50.0, 100.0, 200.0] {
        for lp in [5.0, 10.0, 20.0] {
            for frac in [0.1, 0.25, 0.4 * 0.99] {
                out.push(ObserverGains::new(l, lp, frac * lp * lp));
            }
        }
    }
    out
}

pub fn riccati_suite() -> Vec<Check> {
    let mut out = Vec::new();
    for g in riccati_gain_grid() {
        let t = riccati_terms(1.0, &g, ObserverKind::Pid).expect("grid gains are valid");
        let r = t.residual();
        out.push(check(
            "riccati",
            format!("pid B=1 L={} L_p={} L_i={}", g.l, g.l_p, g.l_i),
            r,
            "<= 1e-9",
            r <= 1e-9,
        ));
    }
    for (b, l, lp) in [(1.0, 50.0, 10.0), (1.0, 100.0, 20.0), (2.5, 50.0, 10.0)] {
        let r = riccati_terms(b, &ObserverGains::new(l, lp, 0.0), ObserverKind::Pd)
            .expect("valid PD gains")
            .residual();
        out.push(check(
            "riccati",
            format!("pd B={b} L={l} L_p={lp}"),
            r,
            "<= 1e-9",
            r <= 1e-9,
        ));
    }
    out
}

fn suite_kinds() -> [(ObserverKind, ObserverGains); 3] {
    [
        (ObserverKind::Pid, ObserverGains::new(50.0, 10.0, 25.0)),
        (ObserverKind::Pd, ObserverGains::new(50.0, 10.0, 0.0)),
        (ObserverKind::Baseline, ObserverGains::new(50.0, 0.0, 0.0)),
    ]
}

/// Square-wave friction (1 Hz, +-1 N) through the difference dynamics and
/// through the exact discretization of the equivalent filter.
pub fn lpf_suite() -> Vec<Check> {
    let dt = 1e-4;
    let u = square_wave(dt, 3.0, 1.0, 1.0);
    let mut out = Vec::new();
    for (kind, g) in suite_kinds() {
        let r = lpf_equivalence(1.0, &g, kind, &u, dt, 0.5).expect("valid gains");
        out.push(check(
            "lpf",
            format!("{kind:?} square-wave relative error"),
            r.relative_error,
            "<= 1e-4",
            r.relative_error <= 1e-4,
        ));
        let lpf = equivalent_lpf(1.0, &g, kind).expect("valid gains");
        let dc = (lpf.dc_gain() - 1.0).abs();
        out.push(check(
            "lpf",
            format!("{kind:?} |dc gain - 1|"),
            dc,
            "<= 1e-12",
            dc <= 1e-12,
        ));
        let round = compensator_from_lpf(&lpf, 1.0).expect("filter is invertible");
        let same = round
            == compensator(1.0, &g, kind)
                .expect("valid gains")
                .normalized();
        out.push(check(
            "lpf",
            format!("{kind:?} compensator round trip"),
            if same { 0.0 } else { 1.0 },
            "exact",
            same,
        ));
    }
    out
}

pub const PASSIVITY_GRID: [f64; 9] = [0.1, 0.5, 1.0, 3.0, 4.9, 5.1, 6.0, 50.0, 1000.0];

pub fn passivity_suite() -> Vec<Check> {
    let mut out = Vec::new();
    for (kind, g) in suite_kinds() {
        let re = observer_passivity_sweep(1.0, &g, kind, &PASSIVITY_GRID).expect("valid grid");
        match kind {
            ObserverKind::Pid => {
                for (w, r) in PASSIVITY_GRID.iter().zip(&re) {
                    let below = w * w < g.l_i;
                    out.push(check(
                        "passivity",
                        format!("Pid Re H(j{w})"),
                        *r,
                        if below { "< 0" } else { ">= 0" },
                        if below { *r < 0.0 } else { *r >= 0.0 },
                    ));
                }
            }
            _ => {
                let min = re.iter().copied().fold(f64::INFINITY, f64::min);
                out.push(check(
                    "passivity",
                    format!("{kind:?} min Re H(jw)"),
                    min,
                    ">= 0",
                    min >= 0.0,
                ));
            }
        }
    }
    out
}

/// Bristle force after holding a constant velocity long enough to settle.
pub fn settled_sliding_force(p: &LuGreParams, v: f64) -> f64 {
    // settling time constant is g(v) / (sigma0 |v|); hold for many of them
    let dt = 1e-5;
    let steps = (20.0 * p.f_s / (p.sigma0 * v.abs()) / dt).ceil() as usize;
    let mut s = LuGreState::default();
    let mut force = 0.0;
    for _ in 0..steps.max(1) {
        let (next, f) = lugre_step(s, v, dt, p).expect("finite inputs");
        s = next;
        force = f;
    }
    force
}

pub fn friction_suite() -> Vec<Check> {
    let p = LuGreParams::default();
    let mut out = Vec::new();
    for v in [0.0005, 0.01] {
        let err = (settled_sliding_force(&p, v) - p.steady_sliding_force(v)).abs();
        out.push(check(
            "friction",
            format!("steady sliding |F - closed form| at v={v}"),
            err,
            "<= 1e-3",
            err <= 1e-3,
        ));
    }
    let f = force_ramp_breakaway(&p, 1.0, 0.1, 1e-5, p.v_s, 3.0).unwrap_or(f64::NAN);
    out.push(check(
        "friction",
        "quasi-static breakaway force".into(),
        f,
        "within 5% of f_s",
        (f - p.f_s).abs() <= 0.05 * p.f_s,
    ));
    out
}

/// All suites in a fixed order.
pub fn run_all() -> Vec<Check> {
    let mut out = riccati_suite();
    out.extend(lpf_suite());
    out.extend(passivity_suite());
    out.extend(friction_suite());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        let failed: Vec<_> = run_all().into_iter().filter(|c| !c.pass).collect();
        assert!(failed.is_empty(), "{failed:#?}");
    }

    #[test]
    fn square_wave_shape() {
        let u = square_wave(0.25, 2.0, 1.0, 1.0);
        assert_eq!(u, vec![1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0]);
    }
}
