//! Classical fixed-step Runge-Kutta.

/// Four-stage RK4 with preallocated stage buffers, so stepping does not
/// allocate.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            stage: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.stage.len()
    }

    /// Advance `x` from `t` to `t + h`. `f(t, x, dxdt)` fills the derivative.
    /// Errors returned by `f` abort the step and leave `x` untouched.
    pub fn step<E, F>(&mut self, t: f64, h: f64, x: &mut [f64], mut f: F) -> Result<(), E>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
    {
        debug_assert_eq!(x.len(), self.dim());
        let [k1, k2, k3, k4] = &mut self.k;
        let y = &mut self.stage;

        f(t, x, k1)?;
        for i in 0..x.len() {
            y[i] = x[i] + 0.5 * h * k1[i];
        }
        f(t + 0.5 * h, y, k2)?;
        for i in 0..x.len() {
            y[i] = x[i] + 0.5 * h * k2[i];
        }
        f(t + 0.5 * h, y, k3)?;
        for i in 0..x.len() {
            y[i] = x[i] + h * k3[i];
        }
        f(t + h, y, k4)?;
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(())
    }
}
