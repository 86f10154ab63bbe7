//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! (degrees 3, 5, 7, 9, 13 chosen from the 1-norm).

use nalgebra::DMatrix;

use super::{OdeError, Trajectory};

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which each degree meets double-precision backward error.
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539_398_330_063_23e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Returns `(U, V)` for a low-degree approximant, `r = (V - U)^{-1} (V + U)`.
fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let mut even = ident.clone() * b[0];
    let mut odd = ident * b[1];
    let mut power = DMatrix::<f64>::identity(n, n);
    for j in 1..b.len() / 2 {
        power = &power * &a2;
        even += &power * b[2 * j];
        odd += &power * b[2 * j + 1];
    }
    (a * odd, even)
}

fn pade13(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = &PADE13;
    let n = a.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    (u, v)
}

/// Computes `e^A`.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>, OdeError> {
    if a.nrows() != a.ncols() {
        return Err(OdeError::InvalidRequest("matrix must be square".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(OdeError::InvalidRequest("matrix has non-finite entries".into()));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(a.clone());
    }
    let norm = one_norm(a);

    let mut squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);
    let a = &scaled;

    let (u, v) = if squarings > 0 || norm > THETA9 {
        pade13(a)
    } else if norm <= THETA3 {
        pade_low(a, &PADE3)
    } else if norm <= THETA5 {
        pade_low(a, &PADE5)
    } else if norm <= THETA7 {
        pade_low(a, &PADE7)
    } else {
        pade_low(a, &PADE9)
    };

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| OdeError::InvalidRequest("singular Padé denominator".into()))?;
    while squarings > 0 {
        r = &r * &r;
        squarings -= 1;
    }
    Ok(r)
}

/// Solves the linear system `dy/dt = A y` analytically: `y(t) = e^{(t - t0) A} y0`
/// with `t0 = 0`.
pub fn solve_linear_expm(a: &DMatrix<f64>, y0: &[f64], ts: &[f64]) -> Result<Trajectory, OdeError> {
    if a.nrows() != y0.len() {
        return Err(OdeError::InvalidRequest(
            "y0 length does not match the matrix".into(),
        ));
    }
    if y0.iter().chain(ts).any(|v| !v.is_finite()) {
        return Err(OdeError::InvalidRequest("non-finite input".into()));
    }
    let y0 = nalgebra::DVector::from_column_slice(y0);
    let states = ts
        .iter()
        .map(|&t| expm(&(a * t)).map(|e| (e * &y0).iter().copied().collect()))
        .collect::<Result<Vec<Vec<f64>>, _>>()?;
    Ok(Trajectory {
        ts: ts.to_vec(),
        states,
    })
}
