//! Initial-value ODE solving with forward sensitivities.
//!
//! Systems follow the `f(t, y, vartheta, x_r, x_i)` convention: `vartheta`
//! holds the inputs that vary with the model parameters (and therefore need
//! sensitivities), `x_r`/`x_i` hold fixed real and integer data.

mod deviation;
mod expm;
mod rk45;
mod sensitivity;

pub use deviation::{shift_to_deviation, DeviationSystem};
pub use expm::{expm, solve_linear_expm};
pub use rk45::solve_rk45;
pub use sensitivity::solve_with_sensitivities;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step limit of {max_steps} exceeded at t = {t}")]
    StepLimitExceeded { max_steps: usize, t: f64 },
    #[error("right-hand side returned a non-finite derivative at t = {t}")]
    NonFiniteDerivative { t: f64 },
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("system provides no Jacobians; wrap it in FiniteDifferenceJacobians")]
    MissingJacobian,
    #[error("invalid solve request: {0}")]
    InvalidRequest(String),
}

/// Right-hand side of `dy/dt = f(t, y, vartheta, x_r, x_i)`.
///
/// Jacobians are optional. When provided they are written row-major:
/// `jac_y[i * N + j] = ∂f_i/∂y_j` and `jac_vartheta[i * K + k] = ∂f_i/∂vartheta_k`.
pub trait OdeSystem: Send + Sync {
    fn n_states(&self) -> usize;

    fn n_varying(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], vartheta: &[f64], x_r: &[f64], x_i: &[i64], dydt: &mut [f64]);

    /// Returns `false` when the system has no Jacobians to offer.
    #[allow(clippy::too_many_arguments)]
    fn jacobians(
        &self,
        _t: f64,
        _y: &[f64],
        _vartheta: &[f64],
        _x_r: &[f64],
        _x_i: &[i64],
        _jac_y: &mut [f64],
        _jac_vartheta: &mut [f64],
    ) -> bool {
        false
    }
}

impl<S: OdeSystem + ?Sized> OdeSystem for &S {
    fn n_states(&self) -> usize {
        (**self).n_states()
    }
    fn n_varying(&self) -> usize {
        (**self).n_varying()
    }
    fn rhs(&self, t: f64, y: &[f64], vartheta: &[f64], x_r: &[f64], x_i: &[i64], dydt: &mut [f64]) {
        (**self).rhs(t, y, vartheta, x_r, x_i, dydt)
    }
    fn jacobians(
        &self,
        t: f64,
        y: &[f64],
        vartheta: &[f64],
        x_r: &[f64],
        x_i: &[i64],
        jac_y: &mut [f64],
        jac_vartheta: &mut [f64],
    ) -> bool {
        (**self).jacobians(t, y, vartheta, x_r, x_i, jac_y, jac_vartheta)
    }
}

impl<S: OdeSystem + ?Sized> OdeSystem for std::sync::Arc<S> {
    fn n_states(&self) -> usize {
        (**self).n_states()
    }
    fn n_varying(&self) -> usize {
        (**self).n_varying()
    }
    fn rhs(&self, t: f64, y: &[f64], vartheta: &[f64], x_r: &[f64], x_i: &[i64], dydt: &mut [f64]) {
        (**self).rhs(t, y, vartheta, x_r, x_i, dydt)
    }
    fn jacobians(
        &self,
        t: f64,
        y: &[f64],
        vartheta: &[f64],
        x_r: &[f64],
        x_i: &[i64],
        jac_y: &mut [f64],
        jac_vartheta: &mut [f64],
    ) -> bool {
        (**self).jacobians(t, y, vartheta, x_r, x_i, jac_y, jac_vartheta)
    }
}

/// Supplies central finite-difference Jacobians for a system that has none.
#[derive(Debug, Clone)]
pub struct FiniteDifferenceJacobians<S>(pub S);

fn fd_step(x: f64) -> f64 {
    1e-7 * x.abs().max(1.0)
}

impl<S: OdeSystem> OdeSystem for FiniteDifferenceJacobians<S> {
    fn n_states(&self) -> usize {
        self.0.n_states()
    }
    fn n_varying(&self) -> usize {
        self.0.n_varying()
    }
    fn rhs(&self, t: f64, y: &[f64], vartheta: &[f64], x_r: &[f64], x_i: &[i64], dydt: &mut [f64]) {
        self.0.rhs(t, y, vartheta, x_r, x_i, dydt)
    }
    fn jacobians(
        &self,
        t: f64,
        y: &[f64],
        vartheta: &[f64],
        x_r: &[f64],
        x_i: &[i64],
        jac_y: &mut [f64],
        jac_vartheta: &mut [f64],
    ) -> bool {
        let n = self.n_states();
        let k = self.n_varying();
        let mut plus = vec![0.0; n];
        let mut minus = vec![0.0; n];

        let mut yy = y.to_vec();
        for j in 0..n {
            let h = fd_step(y[j]);
            yy[j] = y[j] + h;
            self.0.rhs(t, &yy, vartheta, x_r, x_i, &mut plus);
            yy[j] = y[j] - h;
            self.0.rhs(t, &yy, vartheta, x_r, x_i, &mut minus);
            yy[j] = y[j];
            for i in 0..n {
                jac_y[i * n + j] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }

        let mut th = vartheta.to_vec();
        for j in 0..k {
            let h = fd_step(vartheta[j]);
            th[j] = vartheta[j] + h;
            self.0.rhs(t, y, &th, x_r, x_i, &mut plus);
            th[j] = vartheta[j] - h;
            self.0.rhs(t, y, &th, x_r, x_i, &mut minus);
            th[j] = vartheta[j];
            for i in 0..n {
                jac_vartheta[i * k + j] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        true
    }
}

/// Parameter-dependent and fixed inputs handed to an [`OdeSystem`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OdeInputs {
    pub vartheta: Vec<f64>,
    pub x_r: Vec<f64>,
    pub x_i: Vec<i64>,
}

impl OdeInputs {
    pub fn new(vartheta: Vec<f64>, x_r: Vec<f64>, x_i: Vec<i64>) -> Self {
        Self { vartheta, x_r, x_i }
    }
}

pub const DEFAULT_REL_TOL: f64 = 1e-6;
pub const DEFAULT_ABS_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveRequest {
    pub y0: Vec<f64>,
    pub t0: f64,
    pub ts: Vec<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

impl SolveRequest {
    pub fn new(y0: Vec<f64>, t0: f64, ts: Vec<f64>) -> Self {
        Self {
            y0,
            t0,
            ts,
            rel_tol: DEFAULT_REL_TOL,
            abs_tol: DEFAULT_ABS_TOL,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }

    pub fn tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn validate(&self, n_states: usize) -> Result<(), OdeError> {
        let bad = |msg: &str| Err(OdeError::InvalidRequest(msg.to_string()));
        if self.y0.len() != n_states {
            return bad("y0 length does not match the number of states");
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        if !self.t0.is_finite() || self.y0.iter().any(|v| !v.is_finite()) {
            return bad("non-finite initial condition");
        }
        if self.ts.iter().any(|t| !t.is_finite()) {
            return bad("non-finite output time");
        }
        if let Some(&first) = self.ts.first() {
            if first <= self.t0 {
                return bad("output times must be greater than t0");
            }
        }
        if self.ts.windows(2).any(|w| w[1] <= w[0]) {
            return bad("output times must be strictly increasing");
        }
        Ok(())
    }
}

/// Solution values at the requested output times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub ts: Vec<f64>,
    /// `states[j]` is the state at `ts[j]`.
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn column(&self, index: usize) -> Vec<f64> {
        self.states.iter().map(|row| row[index]).collect()
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTrajectory {
    pub trajectory: Trajectory,
    /// `sensitivities[j][i][k]` is `∂y_i(ts[j]) / ∂p_k`, where the columns `p`
    /// are the varying inputs followed by the masked initial states.
    pub sensitivities: Vec<Vec<Vec<f64>>>,
    /// Size of the coupled system that was integrated: `N + N * K'`.
    pub n_equations: usize,
}

impl SensitivityTrajectory {
    pub fn n_columns(&self) -> usize {
        self.sensitivities
            .first()
            .and_then(|rows| rows.first())
            .map_or(0, Vec::len)
    }
}
