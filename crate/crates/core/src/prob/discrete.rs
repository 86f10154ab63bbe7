use rand_distr::Distribution;
use statrs::function::gamma::{digamma, ln_gamma};

use super::{domain, ProbError, Rng};

/// Added to predictive means before negative-binomial draws so that a zero
/// mean stays a valid parameter.
pub const PREDICTIVE_MEAN_OFFSET: f64 = 1e-5;

// Below this count, Γ and ψ ratios are summed term by term; this keeps the
// Poisson limit (huge φ) accurate.
const SMALL_COUNT: u64 = 64;

fn check_nb(mu: f64, phi: f64) -> Result<(), ProbError> {
    if !(mu > 0.0 && mu.is_finite()) {
        return domain(format!("negative binomial mean must be positive, got {mu}"));
    }
    if !(phi > 0.0 && phi.is_finite()) {
        return domain(format!("negative binomial dispersion must be positive, got {phi}"));
    }
    Ok(())
}

/// `ln Γ(y + φ) - ln Γ(φ)`.
fn ln_rising(phi: f64, y: u64) -> f64 {
    if y <= SMALL_COUNT {
        (0..y).map(|j| (phi + j as f64).ln()).sum()
    } else {
        ln_gamma(y as f64 + phi) - ln_gamma(phi)
    }
}

/// `ψ(y + φ) - ψ(φ)`.
fn digamma_diff(phi: f64, y: u64) -> f64 {
    if y <= SMALL_COUNT {
        (0..y).map(|j| 1.0 / (phi + j as f64)).sum()
    } else {
        digamma(y as f64 + phi) - digamma(phi)
    }
}

/// Log pmf of the mean/dispersion negative binomial: mean `mu`, variance
/// `mu + mu^2 / phi`.
pub fn negbin2_logpmf(y: u64, mu: f64, phi: f64) -> Result<f64, ProbError> {
    check_nb(mu, phi)?;
    let yf = y as f64;
    let log_ratio = (mu / phi).ln_1p();
    Ok(ln_rising(phi, y) - ln_gamma(yf + 1.0) - phi * log_ratio
        + if y > 0 { yf * (mu.ln() - (mu + phi).ln()) } else { 0.0 })
}

/// `(∂/∂mu, ∂/∂phi)` of [`negbin2_logpmf`].
pub fn negbin2_grad(y: u64, mu: f64, phi: f64) -> Result<(f64, f64), ProbError> {
    check_nb(mu, phi)?;
    let yf = y as f64;
    let d_mu = yf / mu - (yf + phi) / (mu + phi);
    let d_phi = digamma_diff(phi, y) - (mu / phi).ln_1p() + (mu - yf) / (mu + phi);
    Ok((d_mu, d_phi))
}

/// Gamma–Poisson mixture draw. A zero mean yields zero.
pub fn negbin2_rng(mu: f64, phi: f64, rng: &mut Rng) -> Result<u64, ProbError> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return domain(format!("negative binomial mean must be non-negative, got {mu}"));
    }
    if !(phi > 0.0 && phi.is_finite()) {
        return domain(format!("negative binomial dispersion must be positive, got {phi}"));
    }
    if mu == 0.0 {
        return Ok(0);
    }
    let rate = rand_distr::Gamma::new(phi, mu / phi)
        .map_err(|e| ProbError::DomainError(e.to_string()))?
        .sample(rng);
    if rate <= 0.0 {
        return Ok(0);
    }
    let count: f64 = rand_distr::Poisson::new(rate)
        .map_err(|e| ProbError::DomainError(e.to_string()))?
        .sample(rng);
    Ok(count as u64)
}

pub fn binomial_logpmf(k: u64, n: u64, p: f64) -> Result<f64, ProbError> {
    if k > n {
        return domain(format!("binomial requires k <= n, got k={k}, n={n}"));
    }
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("binomial probability must lie in [0, 1], got {p}"));
    }
    let (kf, nf) = (k as f64, n as f64);
    let log_choose = ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0);
    let successes = if k > 0 { kf * p.ln() } else { 0.0 };
    let failures = if n > k { (nf - kf) * (-p).ln_1p() } else { 0.0 };
    Ok(log_choose + successes + failures)
}

/// `∂/∂p` of [`binomial_logpmf`].
pub fn binomial_grad_p(k: u64, n: u64, p: f64) -> Result<f64, ProbError> {
    binomial_logpmf(k, n, p)?;
    let (kf, nf) = (k as f64, n as f64);
    let successes = if k > 0 { kf / p } else { 0.0 };
    let failures = if n > k { (nf - kf) / (1.0 - p) } else { 0.0 };
    Ok(successes - failures)
}

pub fn binomial_rng(n: u64, p: f64, rng: &mut Rng) -> Result<u64, ProbError> {
    Ok(rand_distr::Binomial::new(n, p)
        .map_err(|e| ProbError::DomainError(e.to_string()))?
        .sample(rng))
}
