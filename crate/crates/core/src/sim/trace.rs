use serde::{Deserialize, Serialize};

use super::SimError;

/// Per-joint recorded signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    Q,
    Qd,
    Theta,
    ThetaDot,
    ThetaN,
    ThetaNDot,
    ENr,
    IEnr,
    TauJ,
    TauC,
    TauM,
    /// Friction estimate.
    TauFHat,
    /// Friction torque entering the motor equation.
    TauFTrue,
    Z,
    TauExt,
    ThetaD,
    /// Motor position of the friction-free, observer-free twin run.
    ThetaIdeal,
}

impl Signal {
    pub const ALL: [Signal; 17] = [
        Signal::Q,
        Signal::Qd,
        Signal::Theta,
        Signal::ThetaDot,
        Signal::ThetaN,
        Signal::ThetaNDot,
        Signal::ENr,
        Signal::IEnr,
        Signal::TauJ,
        Signal::TauC,
        Signal::TauM,
        Signal::TauFHat,
        Signal::TauFTrue,
        Signal::Z,
        Signal::TauExt,
        Signal::ThetaD,
        Signal::ThetaIdeal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Signal::Q => "q",
            Signal::Qd => "qd",
            Signal::Theta => "theta",
            Signal::ThetaDot => "theta_dot",
            Signal::ThetaN => "theta_n",
            Signal::ThetaNDot => "theta_n_dot",
            Signal::ENr => "e_nr",
            Signal::IEnr => "i_enr",
            Signal::TauJ => "tau_j",
            Signal::TauC => "tau_c",
            Signal::TauM => "tau_m",
            Signal::TauFHat => "tau_f_hat",
            Signal::TauFTrue => "tau_f_true",
            Signal::Z => "z",
            Signal::TauExt => "tau_ext",
            Signal::ThetaD => "theta_d",
            Signal::ThetaIdeal => "theta_ideal",
        }
    }

    pub fn from_name(name: &str) -> Option<Signal> {
        Signal::ALL.into_iter().find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JointTrace {
    data: Vec<Vec<f64>>,
}

impl JointTrace {
    fn with_capacity(cap: usize) -> Self {
        Self {
            data: (0..Signal::ALL.len())
                .map(|_| Vec::with_capacity(cap))
                .collect(),
        }
    }

    pub fn get(&self, s: Signal) -> &[f64] {
        &self.data[s as usize]
    }

    pub(crate) fn push(&mut self, s: Signal, v: f64) {
        self.data[s as usize].push(v);
    }

    pub(crate) fn set(&mut self, s: Signal, v: Vec<f64>) {
        self.data[s as usize] = v;
    }
}

/// Uniformly sampled record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub t: Vec<f64>,
    pub sample_period: f64,
    pub joints: Vec<JointTrace>,
}

impl SimTrace {
    pub(crate) fn new(n: usize, sample_period: f64, cap: usize) -> Self {
        Self {
            t: Vec::with_capacity(cap),
            sample_period,
            joints: (0..n).map(|_| JointTrace::with_capacity(cap)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joint(&self, j: usize) -> &JointTrace {
        &self.joints[j]
    }

    pub fn has_ideal(&self) -> bool {
        self.joints
            .first()
            .is_some_and(|j| j.get(Signal::ThetaIdeal).len() == self.len() && !self.is_empty())
    }

    /// Signals present in this trace, in column order.
    pub fn signals(&self) -> Vec<Signal> {
        let ideal = self.has_ideal();
        Signal::ALL
            .into_iter()
            .filter(|s| *s != Signal::ThetaIdeal || ideal)
            .collect()
    }

    fn column_name(&self, s: Signal, j: usize) -> String {
        if self.dof() == 1 {
            s.name().to_string()
        } else {
            format!("{}_{}", s.name(), j + 1)
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        for s in self.signals() {
            for j in 0..self.dof() {
                h.push(self.column_name(s, j));
            }
        }
        h
    }

    pub fn row(&self, k: usize) -> Vec<f64> {
        let mut r = vec![self.t[k]];
        for s in self.signals() {
            for j in &self.joints {
                r.push(j.get(s)[k]);
            }
        }
        r
    }

    /// Index of the first sample at or after `t0`.
    pub fn index_at(&self, t0: f64) -> usize {
        self.t
            .partition_point(|&t| t < t0 - 1e-9 * self.sample_period)
    }

    /// Start index of the trailing window of the given length.
    pub fn window_start(&self, window: f64) -> Result<usize, SimError> {
        let end = *self.t.last().ok_or(SimError::EmptyWindow)?;
        let start = self.index_at(end - window);
        if window <= 0.0
            || start + 1 >= self.len()
            || self.t[0] > end - window + 1e-9 * self.sample_period
        {
            return Err(SimError::EmptyWindow);
        }
        Ok(start)
    }

    /// Rebuild a trace from a header and rows as written by [`header`] and
    /// [`row`].
    ///
    /// [`header`]: SimTrace::header
    /// [`row`]: SimTrace::row
    pub fn from_table(header: &[String], rows: &[Vec<f64>]) -> Result<Self, SimError> {
        let bad = |m: String| SimError::InvalidTrace(m);
        if header.first().map(String::as_str) != Some("t") {
            return Err(bad("first column must be t".into()));
        }
        let mut cols: Vec<(Signal, usize)> = Vec::new();
        let mut n = 0;
        for name in &header[1..] {
            let (base, j) = match name.rsplit_once('_') {
                Some((b, idx))
                    if idx.chars().all(|c| c.is_ascii_digit())
                        && Signal::from_name(b).is_some() =>
                {
                    let j: usize = idx.parse().map_err(|_| bad(format!("bad column {name}")))?;
                    if j == 0 {
                        return Err(bad(format!("bad column {name}")));
                    }
                    (b, j - 1)
                }
                _ => (name.as_str(), 0),
            };
            let s = Signal::from_name(base).ok_or_else(|| bad(format!("unknown column {name}")))?;
            n = n.max(j + 1);
            cols.push((s, j));
        }
        let period = if rows.len() > 1 {
            rows[1][0] - rows[0][0]
        } else {
            0.0
        };
        let mut tr = SimTrace::new(n, period, rows.len());
        for r in rows {
            if r.len() != header.len() {
                return Err(bad("row length differs from header".into()));
            }
            tr.t.push(r[0]);
            for (&(s, j), v) in cols.iter().zip(&r[1..]) {
                tr.joints[j].push(s, *v);
            }
        }
        for jt in &tr.joints {
            for s in Signal::ALL {
                let len = jt.get(s).len();
                if len != tr.len() && !(s == Signal::ThetaIdeal && len == 0) {
                    return Err(bad(format!("missing column {}", s.name())));
                }
            }
        }
        Ok(tr)
    }
}
