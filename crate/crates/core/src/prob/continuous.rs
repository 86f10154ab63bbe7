use statrs::function::beta::ln_beta;

use super::{domain, ProbError};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Φ(z)` for the standard normal CDF.
fn ln_std_normal_cdf(z: f64) -> f64 {
    (0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)).ln()
}

fn check_scale(sigma: f64) -> Result<(), ProbError> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        domain(format!("scale must be positive, got {sigma}"))
    }
}

/// Normal(`mu`, `sigma`) truncated to `[0, ∞)`, normalized.
pub fn half_normal_logpdf(x: f64, mu: f64, sigma: f64) -> Result<f64, ProbError> {
    check_scale(sigma)?;
    if !(x >= 0.0) || !x.is_finite() {
        return domain(format!("half-normal support is [0, inf), got {x}"));
    }
    let z = (x - mu) / sigma;
    Ok(-0.5 * z * z - sigma.ln() - LN_SQRT_2PI - ln_std_normal_cdf(mu / sigma))
}

pub fn half_normal_grad(x: f64, mu: f64, sigma: f64) -> Result<f64, ProbError> {
    half_normal_logpdf(x, mu, sigma)?;
    Ok(-(x - mu) / (sigma * sigma))
}

pub fn exponential_logpdf(x: f64, rate: f64) -> Result<f64, ProbError> {
    check_scale(rate)?;
    if !(x >= 0.0) || !x.is_finite() {
        return domain(format!("exponential support is [0, inf), got {x}"));
    }
    Ok(rate.ln() - rate * x)
}

pub fn exponential_grad(x: f64, rate: f64) -> Result<f64, ProbError> {
    exponential_logpdf(x, rate)?;
    Ok(-rate)
}

pub fn beta_logpdf(x: f64, a: f64, b: f64) -> Result<f64, ProbError> {
    check_scale(a)?;
    check_scale(b)?;
    if !(x > 0.0 && x < 1.0) {
        return domain(format!("beta support is (0, 1), got {x}"));
    }
    Ok((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b))
}

pub fn beta_grad(x: f64, a: f64, b: f64) -> Result<f64, ProbError> {
    beta_logpdf(x, a, b)?;
    Ok((a - 1.0) / x - (b - 1.0) / (1.0 - x))
}

pub fn uniform_logpdf(x: f64, lo: f64, hi: f64) -> Result<f64, ProbError> {
    if !(lo < hi) {
        return domain("uniform requires lo < hi");
    }
    if !(x >= lo && x <= hi) {
        return domain(format!("uniform support is [{lo}, {hi}], got {x}"));
    }
    Ok(-(hi - lo).ln())
}

pub fn uniform_grad(x: f64, lo: f64, hi: f64) -> Result<f64, ProbError> {
    uniform_logpdf(x, lo, hi)?;
    Ok(0.0)
}
