//! Frequency-domain and algebraic views of the observers: compensator and
//! equivalent low-pass filter, the Riccati identity behind the decay proof,
//! the passivity of the estimate map, and time-domain cross-checks.

use std::convert::Infallible;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{estimate_from_error, ObserverError, ObserverGains, ObserverKind};
use crate::ode::Rk4;

/// Rational function of `s` with coefficients in descending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

fn poly_eval(p: &[f64], s: Complex64) -> Complex64 {
    p.iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let pad = |p: &[f64]| {
        let mut v = vec![0.0; n - p.len()];
        v.extend_from_slice(p);
        v
    };
    let (a, b) = (pad(a), pad(b));
    a.iter().zip(&b).map(|(x, y)| x - y).collect()
}

fn strip_leading_zeros(p: &mut Vec<f64>) {
    let first = p
        .iter()
        .position(|&c| c != 0.0)
        .unwrap_or(p.len().saturating_sub(1));
    p.drain(..first);
}

impl TransferFunction {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self, ObserverError> {
        let tf = Self { num, den };
        tf.validate()?;
        Ok(tf)
    }

    pub fn validate(&self) -> Result<(), ObserverError> {
        if self.num.is_empty() || self.den.is_empty() {
            return Err(ObserverError::InvalidTransferFunction(
                "empty coefficient list".into(),
            ));
        }
        if self.den[0] == 0.0 {
            return Err(ObserverError::InvalidTransferFunction(
                "denominator leading coefficient is zero".into(),
            ));
        }
        if self.num.iter().chain(&self.den).any(|c| !c.is_finite()) {
            return Err(ObserverError::InvalidTransferFunction(
                "non-finite coefficient".into(),
            ));
        }
        Ok(())
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        poly_eval(&self.num, s) / poly_eval(&self.den, s)
    }

    pub fn dc_gain(&self) -> f64 {
        self.eval(Complex64::new(0.0, 0.0)).re
    }

    /// Relative degree `deg(den) - deg(num)`.
    pub fn relative_degree(&self) -> isize {
        self.den.len() as isize - self.num.len() as isize
    }

    /// Drop leading zeros, cancel common factors of `s` and make the
    /// denominator monic.
    pub fn normalized(mut self) -> Self {
        strip_leading_zeros(&mut self.num);
        strip_leading_zeros(&mut self.den);
        while self.num.len() > 1
            && self.den.len() > 1
            && self.num.last() == Some(&0.0)
            && self.den.last() == Some(&0.0)
        {
            self.num.pop();
            self.den.pop();
        }
        let lead = self.den[0];
        if lead != 0.0 && lead != 1.0 {
            self.num.iter_mut().for_each(|c| *c /= lead);
            self.den.iter_mut().for_each(|c| *c /= lead);
        }
        self
    }
}

fn require_compensating(kind: ObserverKind, gains: &ObserverGains) -> Result<(), ObserverError> {
    if kind == ObserverKind::None {
        return Err(ObserverError::UnsupportedKind(kind));
    }
    gains.validate(kind)
}

/// Observer compensator `C(s)` mapping `e_nr` to the estimate.
pub fn compensator(
    b: f64,
    gains: &ObserverGains,
    kind: ObserverKind,
) -> Result<TransferFunction, ObserverError> {
    require_compensating(kind, gains)?;
    let r = b * gains.l;
    let tf = match kind {
        ObserverKind::Pid => {
            TransferFunction::new(vec![-r, -r * gains.l_p, -r * gains.l_i], vec![1.0, 0.0])
        }
        ObserverKind::Pd => TransferFunction::new(vec![-r, -r * gains.l_p], vec![1.0]),
        ObserverKind::Baseline => TransferFunction::new(vec![-r, 0.0], vec![1.0]),
        ObserverKind::None => unreachable!(),
    }?;
    Ok(tf)
}

/// Low-pass filter relating the true friction torque to its estimate.
pub fn equivalent_lpf(
    b: f64,
    gains: &ObserverGains,
    kind: ObserverKind,
) -> Result<TransferFunction, ObserverError> {
    require_compensating(kind, gains)?;
    if !(b.is_finite() && b > 0.0) {
        return Err(ObserverError::InvalidGains {
            kind,
            reason: "B must be > 0".into(),
        });
    }
    let (l, lp, li) = (gains.l, gains.l_p, gains.l_i);
    let tf = match kind {
        ObserverKind::Pid => {
            TransferFunction::new(vec![l, l * lp, l * li], vec![1.0, l, l * lp, l * li])
        }
        ObserverKind::Pd => TransferFunction::new(vec![l, l * lp], vec![1.0, l, l * lp]),
        ObserverKind::Baseline => TransferFunction::new(vec![l], vec![1.0, l]),
        ObserverKind::None => unreachable!(),
    }?;
    Ok(tf)
}

/// Recover the compensator from a filter: `C = LPF / (P (LPF - 1))` with
/// plant `P = 1/(B s^2)`, i.e. `C = B s^2 N / (N - D)`.
pub fn compensator_from_lpf(
    lpf: &TransferFunction,
    b: f64,
) -> Result<TransferFunction, ObserverError> {
    lpf.validate()?;
    let num = poly_mul(&[b, 0.0, 0.0], &lpf.num);
    let den = poly_sub(&lpf.num, &lpf.den);
    let tf = TransferFunction { num, den }.normalized();
    tf.validate()?;
    Ok(tf)
}

/// Inverse of [`compensator_from_lpf`]: `LPF = C_n / (C_n - B s^2 C_d)`.
pub fn lpf_from_compensator(
    c: &TransferFunction,
    b: f64,
) -> Result<TransferFunction, ObserverError> {
    c.validate()?;
    let den = poly_sub(&c.num, &poly_mul(&[b, 0.0, 0.0], &c.den));
    let tf = TransferFunction {
        num: c.num.clone(),
        den,
    }
    .normalized();
    tf.validate()?;
    Ok(tf)
}

/// Matrices of the difference dynamics in state-space form together with
/// the quadratic storage and weight that solve the Riccati identity.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiTerms {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: f64,
}

impl RiccatiTerms {
    /// `A^T P + P A - P b R b^T P + Q`.
    pub fn residual_matrix(&self) -> DMatrix<f64> {
        let pb = &self.p * &self.b;
        self.a.transpose() * &self.p + &self.p * &self.a - &pb * pb.transpose() * self.r + &self.q
    }

    pub fn residual(&self) -> f64 {
        self.residual_matrix().norm()
    }

    /// Residual scaled by the largest entry of `P` or `Q`.
    pub fn relative_residual(&self) -> f64 {
        let scale = self.p.amax().max(self.q.amax()).max(1.0);
        self.residual() / scale
    }
}

/// Build `A`, `b`, `P`, `Q`, `R = BL` for the PID state `[int e, e, e']` or
/// the PD state `[e, e']`.
pub fn riccati_terms(
    b: f64,
    gains: &ObserverGains,
    kind: ObserverKind,
) -> Result<RiccatiTerms, ObserverError> {
    gains.validate(kind)?;
    if !(b.is_finite() && b > 0.0) {
        return Err(ObserverError::InvalidGains {
            kind,
            reason: "B must be > 0".into(),
        });
    }
    let (lp, li) = (gains.l_p, gains.l_i);
    let r = b * gains.l;
    match kind {
        ObserverKind::Pid => {
            let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -li, -lp]);
            let p = DMatrix::from_row_slice(
                3,
                3,
                &[
                    b * li * li + li * lp * r,
                    b * lp * li + li * r,
                    b * li,
                    b * lp * li + li * r,
                    b * lp * lp + lp * r,
                    b * lp,
                    b * li,
                    b * lp,
                    b,
                ],
            );
            let q = DMatrix::from_diagonal(&DVector::from_vec(vec![
                li * li * r,
                (lp * lp - 2.0 * li) * r,
                r,
            ]));
            Ok(RiccatiTerms {
                a,
                b: DVector::from_vec(vec![0.0, 0.0, 1.0 / b]),
                p,
                q,
                r,
            })
        }
        ObserverKind::Pd => {
            let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -lp]);
            let p = DMatrix::from_row_slice(2, 2, &[b * lp * lp + lp * r, b * lp, b * lp, b]);
            let q = DMatrix::from_diagonal(&DVector::from_vec(vec![lp * lp * r, r]));
            Ok(RiccatiTerms {
                a,
                b: DVector::from_vec(vec![0.0, 1.0 / b]),
                p,
                q,
                r,
            })
        }
        other => Err(ObserverError::UnsupportedKind(other)),
    }
}

/// Frobenius norm of the Riccati residual.
pub fn riccati_residual(
    b: f64,
    gains: &ObserverGains,
    kind: ObserverKind,
) -> Result<f64, ObserverError> {
    Ok(riccati_terms(b, gains, kind)?.residual())
}

/// Map from `u = -e_nr'` to the estimate: `H(s) = -C(s)/s`.
pub fn estimate_map(
    b: f64,
    gains: &ObserverGains,
    kind: ObserverKind,
) -> Result<TransferFunction, ObserverError> {
    let c = compensator(b, gains, kind)?;
    let num = c.num.iter().map(|x| -x).collect();
    let den = poly_mul(&c.den, &[1.0, 0.0]);
    Ok(TransferFunction { num, den }.normalized())
}

/// `Re H(j omega)` over a strictly positive frequency grid.
pub fn observer_passivity_sweep(
    b: f64,
    gains: &ObserverGains,
    kind: ObserverKind,
    omegas: &[f64],
) -> Result<Vec<f64>, ObserverError> {
    if let Some(&w) = omegas.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(ObserverError::NonPositiveFrequency(w));
    }
    let h = estimate_map(b, gains, kind)?;
    Ok(omegas
        .iter()
        .map(|&w| h.eval(Complex64::new(0.0, w)).re)
        .collect())
}

/// Standalone difference dynamics `B e'' = tau_f_hat - tau_f` closed with the
/// estimate law, driven by a friction sequence held constant over each step.
/// Returns the estimate at every sample, starting from a zero state.
pub fn difference_dynamics_response(
    b: f64,
    gains: &ObserverGains,
    kind: ObserverKind,
    friction: &[f64],
    dt: f64,
) -> Result<Vec<f64>, ObserverError> {
    require_compensating(kind, gains)?;
    let mut rk = Rk4::new(3);
    // [int e, e, e']
    let mut x = [0.0; 3];
    let mut out = Vec::with_capacity(friction.len());
    for (k, &tau_f) in friction.iter().enumerate() {
        out.push(estimate_from_error(x[1], x[2], x[0], gains, kind, b));
        rk.step(k as f64 * dt, dt, &mut x, |_, y, d| {
            let est = estimate_from_error(y[1], y[2], y[0], gains, kind, b);
            d[0] = y[1];
            d[1] = y[2];
            d[2] = (est - tau_f) / b;
            Ok::<_, Infallible>(())
        })
        .unwrap();
    }
    Ok(out)
}

/// Exact zero-order-hold discretization of a strictly proper transfer
/// function in controllable canonical form, applied to `input`.
pub fn zoh_filter(
    tf: &TransferFunction,
    input: &[f64],
    dt: f64,
) -> Result<Vec<f64>, ObserverError> {
    let tf = tf.clone().normalized();
    tf.validate()?;
    if tf.relative_degree() < 1 {
        return Err(ObserverError::InvalidTransferFunction(
            "filter must be strictly proper".into(),
        ));
    }
    let n = tf.den.len() - 1;
    // augmented generator [[A, b], [0, 0]] so that exp(M dt) = [[Ad, bd], [0, 1]]
    let mut m = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n - 1 {
        m[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        m[(n - 1, j)] = -tf.den[n - j];
    }
    m[(n - 1, n)] = 1.0;
    let e = (m * dt).exp();
    let ad = e.view((0, 0), (n, n)).into_owned();
    let bd = e.view((0, n), (n, 1)).column(0).into_owned();
    let mut c = DVector::zeros(n);
    let deg = tf.num.len() - 1;
    for (k, coef) in tf.num.iter().enumerate() {
        c[deg - k] = *coef;
    }
    let mut x = DVector::zeros(n);
    let mut out = Vec::with_capacity(input.len());
    for &u in input {
        out.push(c.dot(&x));
        x = &ad * x + &bd * u;
    }
    Ok(out)
}

/// Largest deviation between the difference-dynamics estimate and the
/// filtered friction after `transient`, relative to the largest filtered
/// magnitude over the same window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpfEquivalence {
    pub max_abs_error: f64,
    pub reference_peak: f64,
    pub relative_error: f64,
}

pub fn lpf_equivalence(
    b: f64,
    gains: &ObserverGains,
    kind: ObserverKind,
    friction: &[f64],
    dt: f64,
    transient: f64,
) -> Result<LpfEquivalence, ObserverError> {
    let direct = difference_dynamics_response(b, gains, kind, friction, dt)?;
    let filtered = zoh_filter(&equivalent_lpf(b, gains, kind)?, friction, dt)?;
    let start = (transient / dt).ceil() as usize;
    let (mut max_abs_error, mut reference_peak) = (0.0f64, 0.0f64);
    for (x, y) in direct.iter().zip(&filtered).skip(start) {
        max_abs_error = max_abs_error.max((x - y).abs());
        reference_peak = reference_peak.max(y.abs());
    }
    Ok(LpfEquivalence {
        max_abs_error,
        reference_peak,
        relative_error: if reference_peak > 0.0 {
            max_abs_error / reference_peak
        } else {
            max_abs_error
        },
    })
}

/// Energy supplied to the estimate map, `E(t) = int (-e') tau_f_hat`, when
/// the disagreement velocity follows `e_dot(t)` from a zero state. Returns
/// `E` at every step boundary, starting with `E(0) = 0`.
pub fn observer_energy_response<F: Fn(f64) -> f64>(
    b: f64,
    gains: &ObserverGains,
    kind: ObserverKind,
    e_dot: F,
    dt: f64,
    duration: f64,
) -> Result<Vec<f64>, ObserverError> {
    require_compensating(kind, gains)?;
    let steps = (duration / dt).round() as usize;
    let mut rk = Rk4::new(3);
    // [int e, e, E]
    let mut x = [0.0; 3];
    let mut out = Vec::with_capacity(steps + 1);
    out.push(0.0);
    for k in 0..steps {
        rk.step(k as f64 * dt, dt, &mut x, |t, y, d| {
            let v = e_dot(t);
            d[0] = y[1];
            d[1] = v;
            d[2] = -v * estimate_from_error(y[1], v, y[0], gains, kind, b);
            Ok::<_, Infallible>(())
        })
        .unwrap();
        out.push(x[2]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pid_low() -> ObserverGains {
        ObserverGains::new(50.0, 10.0, 25.0)
    }
    fn pd_low() -> ObserverGains {
        ObserverGains::new(50.0, 10.0, 0.0)
    }
    fn base_low() -> ObserverGains {
        ObserverGains::new(50.0, 0.0, 0.0)
    }

    #[test]
    fn pid_p_and_q_entries() {
        let t = riccati_terms(1.0, &pid_low(), ObserverKind::Pid).unwrap();
        let p = DMatrix::from_row_slice(
            3,
            3,
            &[13125.0, 1500.0, 25.0, 1500.0, 600.0, 10.0, 25.0, 10.0, 1.0],
        );
        assert_eq!(t.p, p);
        assert_eq!(
            t.q,
            DMatrix::from_diagonal(&DVector::from_vec(vec![31250.0, 2500.0, 50.0]))
        );
        assert!(t.residual() <= 1e-9);
    }

    #[test]
    fn riccati_residual_paper_gains() {
        assert!(
            riccati_residual(
                1.0,
                &ObserverGains::new(100.0, 20.0, 100.0),
                ObserverKind::Pid
            )
            .unwrap()
                <= 1e-9
        );
        let pd = riccati_terms(1.0, &pd_low(), ObserverKind::Pd).unwrap();
        assert_eq!(
            pd.p,
            DMatrix::from_row_slice(2, 2, &[600.0, 10.0, 10.0, 1.0])
        );
        assert!(pd.residual() <= 1e-9);
    }

    #[test]
    fn pd_storage_with_non_unit_inertia() {
        let t = riccati_terms(2.5, &pd_low(), ObserverKind::Pd).unwrap();
        assert!(t.residual() <= 1e-9, "{}", t.residual());
        // the alternative top-left entry B L_p^2 + B L_p R only coincides when B = 1
        let mut alt = t.clone();
        alt.p[(0, 0)] = 2.5 * 100.0 + 2.5 * 10.0 * t.r;
        assert!(alt.residual() > 1.0);
    }

    #[test]
    fn riccati_rejects_bad_kinds() {
        assert!(riccati_residual(1.0, &base_low(), ObserverKind::Baseline).is_err());
        assert!(riccati_residual(
            1.0,
            &ObserverGains::new(50.0, 10.0, 60.0),
            ObserverKind::Pid
        )
        .is_err());
    }

    #[test]
    fn lpf_shapes_and_unity_dc() {
        let pid = equivalent_lpf(1.0, &pid_low(), ObserverKind::Pid).unwrap();
        assert_eq!(pid.num, vec![50.0, 500.0, 1250.0]);
        assert_eq!(pid.den, vec![1.0, 50.0, 500.0, 1250.0]);
        let base = equivalent_lpf(1.0, &base_low(), ObserverKind::Baseline).unwrap();
        assert_eq!(
            (base.num.clone(), base.den.clone()),
            (vec![50.0], vec![1.0, 50.0])
        );
        for tf in [
            pid,
            base,
            equivalent_lpf(1.0, &pd_low(), ObserverKind::Pd).unwrap(),
        ] {
            assert!((tf.dc_gain() - 1.0).abs() < 1e-15);
        }
        assert!(equivalent_lpf(1.0, &pd_low(), ObserverKind::None).is_err());
    }

    #[test]
    fn compensator_round_trip_is_exact() {
        for b in [1.0, 0.5, 3.0] {
            for (kind, g) in [
                (ObserverKind::Pid, pid_low()),
                (ObserverKind::Pd, pd_low()),
                (ObserverKind::Baseline, base_low()),
            ] {
                let lpf = equivalent_lpf(b, &g, kind).unwrap();
                let c = compensator_from_lpf(&lpf, b).unwrap();
                assert_eq!(
                    c,
                    compensator(b, &g, kind).unwrap().normalized(),
                    "{kind:?} B={b}"
                );
                assert_eq!(lpf_from_compensator(&c, b).unwrap(), lpf);
            }
        }
    }

    #[test]
    fn passivity_real_parts() {
        let omegas = [0.1, 1.0, 3.0, 5.0, 6.0, 100.0];
        for re in observer_passivity_sweep(1.0, &pd_low(), ObserverKind::Pd, &omegas).unwrap() {
            assert!((re - 50.0).abs() < 1e-9);
        }
        for re in
            observer_passivity_sweep(1.0, &base_low(), ObserverKind::Baseline, &omegas).unwrap()
        {
            assert!((re - 50.0).abs() < 1e-12);
        }
        let pid = observer_passivity_sweep(1.0, &pid_low(), ObserverKind::Pid, &omegas).unwrap();
        for (w, re) in omegas.iter().zip(&pid) {
            let expect = 50.0 * (w * w - 25.0) / (w * w);
            assert!((re - expect).abs() < 1e-9 * expect.abs().max(1.0));
        }
        assert!(pid[2] < 0.0 && pid[4] >= 0.0);
        assert!(observer_passivity_sweep(1.0, &pd_low(), ObserverKind::Pd, &[0.0]).is_err());
    }

    fn square_wave(dt: f64, duration: f64) -> Vec<f64> {
        let n = (duration / dt).round() as usize;
        // +1 on the first half of each second, -1 on the second half
        (0..n)
            .map(|k| {
                if (k * 2 / (1.0 / dt).round() as usize).is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect()
    }

    #[test]
    fn difference_dynamics_match_filter() {
        let dt = 1e-4;
        let u = square_wave(dt, 3.0);
        for (kind, g) in [
            (ObserverKind::Pid, pid_low()),
            (ObserverKind::Pd, pd_low()),
            (ObserverKind::Baseline, base_low()),
        ] {
            let r = lpf_equivalence(1.0, &g, kind, &u, dt, 0.5).unwrap();
            assert!(r.relative_error <= 1e-4, "{kind:?}: {r:?}");
        }
    }

    /// First-order filter against the closed-form step response.
    #[test]
    fn zoh_filter_first_order_step() {
        let tf = TransferFunction::new(vec![20.0], vec![1.0, 20.0]).unwrap();
        let dt = 1e-3;
        let y = zoh_filter(&tf, &vec![1.0; 201], dt).unwrap();
        for (k, v) in y.iter().enumerate() {
            let t = k as f64 * dt;
            assert!((v - (1.0 - (-20.0 * t).exp())).abs() < 1e-12);
        }
        assert!(zoh_filter(
            &TransferFunction::new(vec![1.0], vec![1.0]).unwrap(),
            &[1.0],
            dt
        )
        .is_err());
    }

    #[test]
    fn energy_audit_pd_never_negative_pid_dips() {
        let (dt, dur) = (1e-3, 20.0);
        for w in [0.5, 2.0, 4.0, 20.0] {
            let e = observer_energy_response(
                1.0,
                &pd_low(),
                ObserverKind::Pd,
                |t| 0.01 * (w * t).cos(),
                dt,
                dur,
            )
            .unwrap();
            let min = e.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-6, "w={w} min={min}");
        }
        // below sqrt(L_i) = 5 rad/s the integral action returns energy
        let e = observer_energy_response(
            1.0,
            &pid_low(),
            ObserverKind::Pid,
            |t| 0.01 * (2.0 * t).cos(),
            dt,
            dur,
        )
        .unwrap();
        assert!(*e.last().unwrap() < 0.0);
        // closed form for e' = A cos(w t) from rest
        let (r, a, w, lp, li) = (50.0, 0.01, 2.0, 10.0, 25.0);
        let exact = |t: f64| {
            let s2 = (2.0 * w * t).sin() / (4.0 * w);
            r * a
                * a
                * (t / 2.0
                    + s2
                    + lp * (w * t).sin().powi(2) / (2.0 * w * w)
                    + li / (w * w) * ((w * t).sin() / w - t / 2.0 - s2))
        };
        for (k, v) in e.iter().enumerate().step_by(997) {
            let t = k as f64 * dt;
            assert!((v - exact(t)).abs() < 1e-9, "t={t}: {v} vs {}", exact(t));
        }
    }
}
