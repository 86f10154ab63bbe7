use crate::ode::{OdeInputs, OdeSystem};

use super::ModelError;

/// Transmission and recovery rates (per day) for a closed population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirInputs {
    pub beta: f64,
    pub gamma: f64,
    pub population: u64,
}

impl SirInputs {
    pub fn new(beta: f64, gamma: f64, population: u64) -> Result<Self, ModelError> {
        if !(beta > 0.0 && gamma > 0.0) {
            return Err(ModelError::InvalidInput("beta and gamma must be positive".into()));
        }
        if population == 0 {
            return Err(ModelError::InvalidInput("population must be positive".into()));
        }
        Ok(Self {
            beta,
            gamma,
            population,
        })
    }

    pub fn ode_inputs(&self) -> OdeInputs {
        OdeInputs::new(vec![self.beta, self.gamma], vec![], vec![self.population as i64])
    }
}

/// `dS = -β S I / N`, `dR = γ I`, `dI = -(dS + dR)`.
pub fn sir_rhs(_t: f64, y: &[f64], vartheta: &[f64], x_i: &[i64]) -> [f64; 3] {
    let (s, i) = (y[0], y[1]);
    let (beta, gamma) = (vartheta[0], vartheta[1]);
    let n = x_i[0] as f64;
    let ds = -beta * s * i / n;
    let dr = gamma * i;
    [ds, -(ds + dr), dr]
}

/// `(∂f/∂y, ∂f/∂(β, γ))`, row-major 3×3 and 3×2.
pub fn sir_jacobians(_t: f64, y: &[f64], vartheta: &[f64], x_i: &[i64]) -> ([f64; 9], [f64; 6]) {
    let (s, i) = (y[0], y[1]);
    let (beta, gamma) = (vartheta[0], vartheta[1]);
    let n = x_i[0] as f64;
    let jy = [
        -beta * i / n,
        -beta * s / n,
        0.0,
        beta * i / n,
        beta * s / n - gamma,
        0.0,
        0.0,
        gamma,
        0.0,
    ];
    let jt = [-s * i / n, 0.0, s * i / n, -i, 0.0, i];
    (jy, jt)
}

/// SIR dynamics with `vartheta = (β, γ)` and `x_i = (N)`. With
/// `track_incidence`, a fourth state `C` accumulates the flux into `I`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Sir {
    pub track_incidence: bool,
}

impl OdeSystem for Sir {
    fn n_states(&self) -> usize {
        if self.track_incidence {
            4
        } else {
            3
        }
    }

    fn n_varying(&self) -> usize {
        2
    }

    fn rhs(&self, t: f64, y: &[f64], vartheta: &[f64], _x_r: &[f64], x_i: &[i64], dydt: &mut [f64]) {
        let d = sir_rhs(t, y, vartheta, x_i);
        dydt[..3].copy_from_slice(&d);
        if self.track_incidence {
            dydt[3] = -d[0];
        }
    }

    fn jacobians(
        &self,
        t: f64,
        y: &[f64],
        vartheta: &[f64],
        _x_r: &[f64],
        x_i: &[i64],
        jac_y: &mut [f64],
        jac_vartheta: &mut [f64],
    ) -> bool {
        let (jy, jt) = sir_jacobians(t, y, vartheta, x_i);
        if !self.track_incidence {
            jac_y.copy_from_slice(&jy);
            jac_vartheta.copy_from_slice(&jt);
            return true;
        }
        jac_y.fill(0.0);
        for r in 0..3 {
            jac_y[r * 4..r * 4 + 3].copy_from_slice(&jy[r * 3..r * 3 + 3]);
        }
        // C row mirrors -dS.
        for c in 0..3 {
            jac_y[12 + c] = -jy[c];
        }
        jac_vartheta[..6].copy_from_slice(&jt);
        jac_vartheta[6] = -jt[0];
        jac_vartheta[7] = -jt[1];
        true
    }
}
