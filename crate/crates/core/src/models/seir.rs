use crate::ode::{OdeInputs, OdeSystem};

use super::ModelError;

/// Number of varying inputs `(β, γ, a, η, ξ, ν)` of the SEIR system.
pub const SEIR_VARYING: usize = 6;

/// Rates and control-measure parameters of the SEIR model with forcing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeirInputs {
    pub beta: f64,
    pub gamma: f64,
    /// Incubation rate, inverse of the mean latent period.
    pub a: f64,
    /// Residual transmission once measures are fully in place.
    pub eta: f64,
    pub xi: f64,
    /// Delay after `t1` until measures are half effective.
    pub nu: f64,
    pub t1: f64,
    pub p_r: f64,
    pub i0: f64,
    pub population: u64,
}

impl SeirInputs {
    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = self.beta > 0.0
            && self.gamma > 0.0
            && self.a > 0.0
            && self.eta > 0.0
            && self.eta < 1.0
            && self.xi > 0.5
            && self.xi < 1.5
            && self.nu >= 0.0
            && self.t1.is_finite()
            && self.p_r > 0.0
            && self.p_r < 1.0
            && self.i0 > 0.0
            && self.population > 0;
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidInput("SEIR inputs out of range".into()))
        }
    }

    /// Inputs for [`Seir`]; `i0` is appended when it is a varying input.
    pub fn ode_inputs(&self, varying_i0: bool) -> OdeInputs {
        let mut vartheta = vec![self.beta, self.gamma, self.a, self.eta, self.xi, self.nu];
        if varying_i0 {
            vartheta.push(self.i0);
        }
        OdeInputs::new(vartheta, vec![self.t1], vec![self.population as i64])
    }
}

fn logistic_decline(t: f64, xi: f64, nu: f64, t1: f64) -> f64 {
    let x = xi * (t - t1 - nu);
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Transmission multiplier `η + (1 - η) / (1 + exp(ξ (t - t1 - ν)))`.
pub fn forcing(t: f64, eta: f64, xi: f64, nu: f64, t1: f64) -> f64 {
    eta + (1.0 - eta) * logistic_decline(t, xi, nu, t1)
}

/// Returns `(f, ∂f/∂η, ∂f/∂ξ, ∂f/∂ν)`.
fn forcing_with_partials(t: f64, eta: f64, xi: f64, nu: f64, t1: f64) -> [f64; 4] {
    let l = logistic_decline(t, xi, nu, t1);
    let dl = l * (1.0 - l);
    [
        eta + (1.0 - eta) * l,
        1.0 - l,
        -(1.0 - eta) * dl * (t - t1 - nu),
        (1.0 - eta) * dl * xi,
    ]
}

/// State `(S, E, I, R, C)`, `vartheta = (β, γ, a, η, ξ, ν, ..)`, `x_r = (t1)`,
/// `x_i = (N)`.
pub fn seir_rhs(t: f64, y: &[f64], vartheta: &[f64], x_r: &[f64], x_i: &[i64]) -> [f64; 5] {
    let (s, e, i) = (y[0], y[1], y[2]);
    let (beta, gamma, a) = (vartheta[0], vartheta[1], vartheta[2]);
    let f = forcing(t, vartheta[3], vartheta[4], vartheta[5], x_r[0]);
    let n = x_i[0] as f64;
    let infection = beta * f * s * i / n;
    let onset = a * e;
    let recovery = gamma * i;
    [-infection, infection - onset, onset - recovery, recovery, onset]
}

/// Row-major `∂f/∂y` (5×5) and `∂f/∂(β, γ, a, η, ξ, ν)` (5×6).
pub fn seir_jacobians(
    t: f64,
    y: &[f64],
    vartheta: &[f64],
    x_r: &[f64],
    x_i: &[i64],
) -> ([f64; 25], [f64; 30]) {
    let (s, i) = (y[0], y[2]);
    let (beta, gamma, a) = (vartheta[0], vartheta[1], vartheta[2]);
    let [f, df_eta, df_xi, df_nu] =
        forcing_with_partials(t, vartheta[3], vartheta[4], vartheta[5], x_r[0]);
    let n = x_i[0] as f64;

    // Partials of the infection flux β f S I / N.
    let dfl_s = beta * f * i / n;
    let dfl_i = beta * f * s / n;
    let si = s * i / n;
    let dfl_theta = [f * si, 0.0, 0.0, beta * si * df_eta, beta * si * df_xi, beta * si * df_nu];

    let mut jy = [0.0; 25];
    // dS
    jy[0] = -dfl_s;
    jy[2] = -dfl_i;
    // dE
    jy[5] = dfl_s;
    jy[6] = -a;
    jy[7] = dfl_i;
    // dI
    jy[11] = a;
    jy[12] = -gamma;
    // dR
    jy[17] = gamma;
    // dC
    jy[21] = a;

    let mut jt = [0.0; 30];
    for k in 0..SEIR_VARYING {
        jt[k] = -dfl_theta[k];
        jt[6 + k] = dfl_theta[k];
    }
    // a
    jt[6 + 2] -= y[1];
    jt[12 + 2] = y[1];
    jt[24 + 2] = y[1];
    // γ
    jt[12 + 1] = -i;
    jt[18 + 1] = i;
    (jy, jt)
}

/// SEIR dynamics with logistic control-measure forcing.
///
/// With `varying_i0`, `i0` is the seventh varying input and the state is the
/// deviation `z = y - y0(i0)` from the initial condition
/// `y0 = (N - 2 i0, i0, i0, 0, 0)`, which keeps the initial condition fixed
/// at zero while `i0` moves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Seir {
    pub varying_i0: bool,
}

impl Seir {
    pub fn initial_state(population: f64, i0: f64) -> [f64; 5] {
        [population - 2.0 * i0, i0, i0, 0.0, 0.0]
    }

    /// `∂y0/∂i0`.
    pub const INITIAL_STATE_SLOPE: [f64; 5] = [-2.0, 1.0, 1.0, 0.0, 0.0];

    fn physical_state(&self, z: &[f64], vartheta: &[f64], x_i: &[i64]) -> [f64; 5] {
        let mut y = [z[0], z[1], z[2], z[3], z[4]];
        if self.varying_i0 {
            let base = Self::initial_state(x_i[0] as f64, vartheta[SEIR_VARYING]);
            for (v, b) in y.iter_mut().zip(base) {
                *v += b;
            }
        }
        y
    }
}

impl OdeSystem for Seir {
    fn n_states(&self) -> usize {
        5
    }

    fn n_varying(&self) -> usize {
        SEIR_VARYING + usize::from(self.varying_i0)
    }

    fn rhs(&self, t: f64, z: &[f64], vartheta: &[f64], x_r: &[f64], x_i: &[i64], dydt: &mut [f64]) {
        let y = self.physical_state(z, vartheta, x_i);
        dydt.copy_from_slice(&seir_rhs(t, &y, vartheta, x_r, x_i));
    }

    fn jacobians(
        &self,
        t: f64,
        z: &[f64],
        vartheta: &[f64],
        x_r: &[f64],
        x_i: &[i64],
        jac_y: &mut [f64],
        jac_vartheta: &mut [f64],
    ) -> bool {
        let y = self.physical_state(z, vartheta, x_i);
        let (jy, jt) = seir_jacobians(t, &y, vartheta, x_r, x_i);
        jac_y.copy_from_slice(&jy);
        let k = self.n_varying();
        for r in 0..5 {
            jac_vartheta[r * k..r * k + SEIR_VARYING]
                .copy_from_slice(&jt[r * SEIR_VARYING..(r + 1) * SEIR_VARYING]);
            if self.varying_i0 {
                jac_vartheta[r * k + SEIR_VARYING] = (0..5)
                    .map(|c| jy[r * 5 + c] * Self::INITIAL_STATE_SLOPE[c])
                    .sum();
            }
        }
        true
    }
}
