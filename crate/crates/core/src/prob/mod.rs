//! Log-densities, gradients and random generation for the distributions the
//! built-in models use.

mod continuous;
mod discrete;
mod rng;

pub use continuous::{
    beta_grad, beta_logpdf, exponential_grad, exponential_logpdf, half_normal_grad,
    half_normal_logpdf, uniform_grad, uniform_logpdf,
};
pub use discrete::{
    binomial_grad_p, binomial_logpmf, binomial_rng, negbin2_grad, negbin2_logpmf, negbin2_rng,
    PREDICTIVE_MEAN_OFFSET,
};
pub use rng::Rng;

use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbError {
    #[error("domain error: {0}")]
    DomainError(String),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T, ProbError> {
    Err(ProbError::DomainError(msg.into()))
}

/// A distribution with its hyperparameters.
///
/// `HalfNormal` is a normal with location `mu` and scale `sigma` truncated
/// to `[0, ∞)`; it is a true half-normal only when `mu = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistSpec {
    HalfNormal { mu: f64, sigma: f64 },
    Exponential { rate: f64 },
    Beta { a: f64, b: f64 },
    Uniform { lo: f64, hi: f64 },
    Negbin2 { mu: f64, phi: f64 },
    Binomial { n: u64, p: f64 },
}

impl DistSpec {
    pub fn validate(&self) -> Result<(), ProbError> {
        let ok = match *self {
            DistSpec::HalfNormal { mu, sigma } => mu.is_finite() && sigma > 0.0,
            DistSpec::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            DistSpec::Beta { a, b } => a > 0.0 && b > 0.0,
            DistSpec::Uniform { lo, hi } => lo < hi && lo.is_finite() && hi.is_finite(),
            DistSpec::Negbin2 { mu, phi } => mu > 0.0 && phi > 0.0,
            DistSpec::Binomial { p, .. } => (0.0..=1.0).contains(&p),
        };
        if ok {
            Ok(())
        } else {
            domain(format!("invalid parameters for {self:?}"))
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, DistSpec::Negbin2 { .. } | DistSpec::Binomial { .. })
    }

    /// Closed support interval `(lower, upper)`.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            DistSpec::HalfNormal { .. } | DistSpec::Exponential { .. } | DistSpec::Negbin2 { .. } => {
                (0.0, f64::INFINITY)
            }
            DistSpec::Beta { .. } => (0.0, 1.0),
            DistSpec::Uniform { lo, hi } => (lo, hi),
            DistSpec::Binomial { n, .. } => (0.0, n as f64),
        }
    }

    pub fn log_density(&self, x: f64) -> Result<f64, ProbError> {
        match *self {
            DistSpec::HalfNormal { mu, sigma } => half_normal_logpdf(x, mu, sigma),
            DistSpec::Exponential { rate } => exponential_logpdf(x, rate),
            DistSpec::Beta { a, b } => beta_logpdf(x, a, b),
            DistSpec::Uniform { lo, hi } => uniform_logpdf(x, lo, hi),
            DistSpec::Negbin2 { mu, phi } => negbin2_logpmf(as_count(x)?, mu, phi),
            DistSpec::Binomial { n, p } => binomial_logpmf(as_count(x)?, n, p),
        }
    }

    /// Derivative of the log-density with respect to the variate.
    pub fn grad(&self, x: f64) -> Result<f64, ProbError> {
        match *self {
            DistSpec::HalfNormal { mu, sigma } => half_normal_grad(x, mu, sigma),
            DistSpec::Exponential { rate } => exponential_grad(x, rate),
            DistSpec::Beta { a, b } => beta_grad(x, a, b),
            DistSpec::Uniform { lo, hi } => uniform_grad(x, lo, hi),
            DistSpec::Negbin2 { .. } | DistSpec::Binomial { .. } => {
                domain("discrete distributions have no variate gradient")
            }
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> Result<f64, ProbError> {
        self.validate()?;
        Ok(match *self {
            DistSpec::HalfNormal { mu, sigma } => loop {
                let z: f64 = rand_distr::StandardNormal.sample(rng);
                let x = mu + sigma * z;
                if x >= 0.0 {
                    break x;
                }
            },
            DistSpec::Exponential { rate } => -(-rng.uniform()).ln_1p() / rate,
            DistSpec::Beta { a, b } => rand_distr::Beta::new(a, b)
                .map_err(|e| ProbError::DomainError(e.to_string()))?
                .sample(rng),
            DistSpec::Uniform { lo, hi } => lo + (hi - lo) * rng.uniform(),
            DistSpec::Negbin2 { mu, phi } => negbin2_rng(mu, phi, rng)? as f64,
            DistSpec::Binomial { n, p } => binomial_rng(n, p, rng)? as f64,
        })
    }
}

fn as_count(x: f64) -> Result<u64, ProbError> {
    if x >= 0.0 && x.fract() == 0.0 && x.is_finite() {
        Ok(x as u64)
    } else {
        domain(format!("{x} is not a count"))
    }
}
