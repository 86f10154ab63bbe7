use super::OdeSystem;

/// `g(z, ...) = f(z + baseline, ...)`: the same dynamics expressed as a
/// deviation from a fixed baseline state, so the solve starts from zero.
#[derive(Debug, Clone)]
pub struct DeviationSystem<S> {
    inner: S,
    baseline: Vec<f64>,
}

impl<S> DeviationSystem<S> {
    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    /// Maps a deviation state back onto the original coordinates.
    pub fn restore(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.baseline).map(|(a, b)| a + b).collect()
    }
}

impl<S: OdeSystem> OdeSystem for DeviationSystem<S> {
    fn n_states(&self) -> usize {
        self.inner.n_states()
    }

    fn n_varying(&self) -> usize {
        self.inner.n_varying()
    }

    fn rhs(&self, t: f64, z: &[f64], vartheta: &[f64], x_r: &[f64], x_i: &[i64], dzdt: &mut [f64]) {
        self.inner.rhs(t, &self.restore(z), vartheta, x_r, x_i, dzdt)
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
        self.inner
            .jacobians(t, &self.restore(z), vartheta, x_r, x_i, jac_y, jac_vartheta)
    }
}

/// Rewrites `sys` in deviation coordinates around `y0`. Returns the shifted
/// system and its (zero) initial condition.
pub fn shift_to_deviation<S: OdeSystem>(sys: S, y0: &[f64]) -> (DeviationSystem<S>, Vec<f64>) {
    let zero = vec![0.0; y0.len()];
    (
        DeviationSystem {
            inner: sys,
            baseline: y0.to_vec(),
        },
        zero,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{solve_rk45, OdeInputs, SolveRequest};

    struct Decay;

    impl OdeSystem for Decay {
        fn n_states(&self) -> usize {
            1
        }
        fn n_varying(&self) -> usize {
            0
        }
        fn rhs(&self, _t: f64, y: &[f64], _: &[f64], _: &[f64], _: &[i64], dy: &mut [f64]) {
            dy[0] = -y[0];
        }
    }

    #[test]
    fn deviation_solve_reconstructs_direct_solve() {
        let ts = vec![0.5, 1.0];
        let direct = solve_rk45(
            &Decay,
            &OdeInputs::default(),
            &SolveRequest::new(vec![1.0], 0.0, ts.clone()).tolerances(1e-12, 1e-12),
        )
        .unwrap();
        let (shifted, z0) = shift_to_deviation(Decay, &[1.0]);
        assert_eq!(z0, vec![0.0]);
        let dev = solve_rk45(
            &shifted,
            &OdeInputs::default(),
            &SolveRequest::new(z0, 0.0, ts).tolerances(1e-12, 1e-12),
        )
        .unwrap();
        for (a, b) in direct.states.iter().zip(&dev.states) {
            let rebuilt = shifted.restore(b);
            assert!((a[0] - rebuilt[0]).abs() <= 1e-10 * a[0].abs());
        }
    }

    #[test]
    fn zero_shift_is_the_same_system() {
        let (shifted, _) = shift_to_deviation(Decay, &[0.0]);
        let mut a = [0.0];
        let mut b = [0.0];
        for y in [-3.0, 0.0, 0.25, 7.5] {
            Decay.rhs(0.0, &[y], &[], &[], &[], &mut a);
            shifted.rhs(0.0, &[y], &[], &[], &[], &mut b);
            assert_eq!(a, b);
        }
    }
}
