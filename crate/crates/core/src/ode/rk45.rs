//! Dormand–Prince 5(4) with PI step-size control and the method's own
//! 4th-order continuous extension for output between steps.

use super::{OdeError, OdeInputs, OdeSystem, SolveRequest, Trajectory};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Continuous-extension weights.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const PI_BETA: f64 = 0.04;

/// Integration statistics returned alongside the output states.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates a flat system `dy/dt = rhs(t, y)` of dimension `y0.len()` and
/// returns the states at `ts`. The request is assumed validated.
pub(crate) fn integrate<F>(
    mut rhs: F,
    y0: &[f64],
    t0: f64,
    ts: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_steps: usize,
) -> Result<(Vec<Vec<f64>>, StepStats), OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut out = Vec::with_capacity(ts.len());
    let mut stats = StepStats::default();
    let Some(&t_end) = ts.last() else {
        return Ok((out, stats));
    };

    let mut eval = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), OdeError> {
        rhs(t, y, dy);
        if dy.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(OdeError::NonFiniteDerivative { t })
        }
    };

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    eval(t, &y, &mut k1)?;

    let mut h = initial_step(&mut eval, t, &y, &k1, t_end - t0, rel_tol, abs_tol)?;

    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    let mut next_out = 0;
    let mut fac_old = 1e-4_f64;
    let mut last_rejected = false;

    while next_out < ts.len() {
        if stats.accepted + stats.rejected >= max_steps {
            return Err(OdeError::StepLimitExceeded { max_steps, t });
        }
        let remaining = t_end - t;
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        if h <= f64::EPSILON * t.abs().max(1.0) {
            return Err(OdeError::StepSizeUnderflow { t });
        }

        for i in 0..n {
            stage[i] = y[i] + h * A21 * k1[i];
        }
        eval(t + C2 * h, &stage, &mut k2)?;
        for i in 0..n {
            stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        eval(t + C3 * h, &stage, &mut k3)?;
        for i in 0..n {
            stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        eval(t + C4 * h, &stage, &mut k4)?;
        for i in 0..n {
            stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        eval(t + C5 * h, &stage, &mut k5)?;
        for i in 0..n {
            stage[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last { t_end } else { t + h };
        eval(t_new, &stage, &mut k6)?;
        for i in 0..n {
            y_new[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        eval(t_new, &y_new, &mut k7)?;

        let mut err = 0.0_f64;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = abs_tol + rel_tol * y[i].abs().max(y_new[i].abs());
            err = err.max(e.abs() / scale);
        }
        if !err.is_finite() {
            return Err(OdeError::NonFiniteDerivative { t: t_new });
        }

        let expo = 0.2 - PI_BETA * 0.75;
        let fac11 = err.powf(expo);
        if err <= 1.0 {
            stats.accepted += 1;
            while next_out < ts.len() && ts[next_out] <= t_new {
                let theta = if last && next_out == ts.len() - 1 {
                    1.0
                } else {
                    (ts[next_out] - t) / h
                };
                out.push(if theta >= 1.0 {
                    y_new.clone()
                } else {
                    (0..n)
                        .map(|i| {
                            let dy = y_new[i] - y[i];
                            let bspl = h * k1[i] - dy;
                            let r4 = dy - h * k7[i] - bspl;
                            let r5 = h
                                * (D1 * k1[i]
                                    + D3 * k3[i]
                                    + D4 * k4[i]
                                    + D5 * k5[i]
                                    + D6 * k6[i]
                                    + D7 * k7[i]);
                            let th1 = 1.0 - theta;
                            y[i] + theta * (dy + th1 * (bspl + theta * (r4 + th1 * r5)))
                        })
                        .collect()
                });
                next_out += 1;
            }

            let mut fac = fac11 / fac_old.powf(PI_BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            fac_old = err.max(1e-4);
            last_rejected = false;

            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            h = h_new;
        } else {
            stats.rejected += 1;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }
    Ok((out, stats))
}

fn initial_step<E>(
    eval: &mut E,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    span: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64, OdeError>
where
    E: FnMut(f64, &[f64], &mut [f64]) -> Result<(), OdeError>,
{
    let n = y0.len() as f64;
    let scale: Vec<f64> = y0.iter().map(|v| abs_tol + rel_tol * v.abs()).collect();
    let rms = |v: &mut dyn Iterator<Item = f64>| (v.map(|x| x * x).sum::<f64>() / n).sqrt();

    let d0 = rms(&mut y0.iter().zip(&scale).map(|(y, s)| y / s));
    let d1 = rms(&mut f0.iter().zip(&scale).map(|(f, s)| f / s));
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);

    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    eval(t0 + h0, &y1, &mut f1)?;
    let d2 = rms(&mut f1.iter().zip(f0).zip(&scale).map(|((a, b), s)| (a - b) / s)) / h0;

    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dmax).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(span))
}

/// Solves `sys` from `req.y0` at `req.t0` and reports the state at every `req.ts`.
pub fn solve_rk45<S: OdeSystem + ?Sized>(
    sys: &S,
    inputs: &OdeInputs,
    req: &SolveRequest,
) -> Result<Trajectory, OdeError> {
    req.validate(sys.n_states())?;
    let (states, _) = integrate(
        |t, y, dy| sys.rhs(t, y, &inputs.vartheta, &inputs.x_r, &inputs.x_i, dy),
        &req.y0,
        req.t0,
        &req.ts,
        req.rel_tol,
        req.abs_tol,
        req.max_steps,
    )?;
    Ok(Trajectory {
        ts: req.ts.clone(),
        states,
    })
}
