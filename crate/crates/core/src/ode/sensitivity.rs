use super::rk45::integrate;
use super::{OdeError, OdeInputs, OdeSystem, SensitivityTrajectory, SolveRequest, Trajectory};

/// Solves `sys` together with its forward sensitivities.
///
/// The sensitivity columns are the `K` varying inputs followed by every
/// initial state flagged in `y0_varying`. Each column `s` obeys
/// `ds/dt = (∂f/∂y) s + ∂f/∂vartheta_k` with `s(t0) = 0` for an input column and
/// `ds/dt = (∂f/∂y) s` with `s(t0) = e_i` for an initial-state column. Error
/// control covers the full coupled state of size `N + N * K'`.
pub fn solve_with_sensitivities<S: OdeSystem + ?Sized>(
    sys: &S,
    inputs: &OdeInputs,
    req: &SolveRequest,
    y0_varying: &[bool],
) -> Result<SensitivityTrajectory, OdeError> {
    let n = sys.n_states();
    let k = sys.n_varying();
    req.validate(n)?;
    if y0_varying.len() != n {
        return Err(OdeError::InvalidRequest(
            "y0_varying mask length does not match the number of states".into(),
        ));
    }
    if inputs.vartheta.len() != k {
        return Err(OdeError::InvalidRequest(
            "vartheta length does not match the system".into(),
        ));
    }

    let y0_columns: Vec<usize> = (0..n).filter(|&i| y0_varying[i]).collect();
    let n_cols = k + y0_columns.len();
    let n_equations = n + n * n_cols;

    let mut jac_y = vec![0.0; n * n];
    let mut jac_th = vec![0.0; n * k];
    if n_cols > 0
        && !sys.jacobians(
            req.t0,
            &req.y0,
            &inputs.vartheta,
            &inputs.x_r,
            &inputs.x_i,
            &mut jac_y,
            &mut jac_th,
        )
    {
        return Err(OdeError::MissingJacobian);
    }

    // Layout: y (N), then column c of the sensitivity matrix at n + c * n.
    let mut z0 = vec![0.0; n_equations];
    z0[..n].copy_from_slice(&req.y0);
    for (offset, &state) in y0_columns.iter().enumerate() {
        z0[n + (k + offset) * n + state] = 1.0;
    }

    let rhs = |t: f64, z: &[f64], dz: &mut [f64]| {
        let y = &z[..n];
        sys.rhs(t, y, &inputs.vartheta, &inputs.x_r, &inputs.x_i, &mut dz[..n]);
        if n_cols == 0 {
            return;
        }
        sys.jacobians(
            t,
            y,
            &inputs.vartheta,
            &inputs.x_r,
            &inputs.x_i,
            &mut jac_y,
            &mut jac_th,
        );
        for c in 0..n_cols {
            let s = &z[n + c * n..n + (c + 1) * n];
            for i in 0..n {
                let row = &jac_y[i * n..(i + 1) * n];
                let mut acc: f64 = row.iter().zip(s).map(|(a, b)| a * b).sum();
                if c < k {
                    acc += jac_th[i * k + c];
                }
                dz[n + c * n + i] = acc;
            }
        }
    };

    let (states, _) = integrate(
        rhs,
        &z0,
        req.t0,
        &req.ts,
        req.rel_tol,
        req.abs_tol,
        req.max_steps,
    )?;

    let mut ys = Vec::with_capacity(states.len());
    let mut sens = Vec::new();
    for z in &states {
        ys.push(z[..n].to_vec());
        if n_cols > 0 {
            sens.push(
                (0..n)
                    .map(|i| (0..n_cols).map(|c| z[n + c * n + i]).collect())
                    .collect(),
            );
        }
    }

    Ok(SensitivityTrajectory {
        trajectory: Trajectory {
            ts: req.ts.clone(),
            states: ys,
        },
        sensitivities: sens,
        n_equations,
    })
}
