//! Prior and posterior predictive simulation, generated quantities,
//! forecasting past the data and the fit-to-simulated-data check.
//!
//! Draw `k` always uses the random stream `rng.split(k)`, so results do not
//! depend on evaluation order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnose::{quantiles, summarize, DiagnosticsReport, Series};
use crate::nuts::{sample, ChainSet, SampleError, SamplerConfig};
use crate::prob::{binomial_rng, negbin2_rng, Rng};
use crate::target::{ModelSpec, ObservedData, Posterior, Role, SerologyRecord, TargetError};

/// Offset added to every simulated negative-binomial mean.
pub const PREDICTIVE_MEAN_OFFSET: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum PredictiveError {
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("{0}")]
    Invalid(String),
}

/// A serology survey to simulate: `tested` people on `day`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SerologyDesign {
    pub day: f64,
    pub tested: u64,
}

/// What to simulate per draw: a daily case series of `n_days` after `t0`
/// and optionally one serology survey.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub n_days: usize,
    pub serology: Option<SerologyDesign>,
}

impl Design {
    pub fn cases(n_days: usize) -> Self {
        Self {
            n_days,
            serology: None,
        }
    }

    /// The design that produced `data`.
    pub fn of(data: &ObservedData) -> Self {
        Self {
            n_days: data.cases.len(),
            serology: data.serology.map(|s| SerologyDesign {
                day: s.day,
                tested: s.tested,
            }),
        }
    }

    fn grid_len(&self, spec: &ModelSpec) -> Result<usize, PredictiveError> {
        let row = match self.serology {
            None => 0,
            Some(s) => {
                let offset = s.day - spec.t0;
                if offset < 1.0 || offset.fract() != 0.0 {
                    return Err(PredictiveError::Invalid(format!(
                        "serology day {} is not on the daily grid after t0 = {}",
                        s.day, spec.t0
                    )));
                }
                offset as usize
            }
        };
        Ok(self.n_days.max(row))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDraw {
    /// Position of the parameter draw in the request.
    pub index: usize,
    pub values: Vec<f64>,
    pub derived: Vec<f64>,
    /// Physical states on the simulated days.
    pub latent: Vec<Vec<f64>>,
    /// Expected cases before the offset.
    pub means: Vec<f64>,
    pub cases: Vec<u64>,
    pub serology_positives: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedDraw {
    pub index: usize,
    pub values: Vec<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDraws {
    pub parameter_names: Vec<String>,
    pub derived_names: Vec<String>,
    pub compartments: Vec<String>,
    pub days: Vec<f64>,
    pub draws: Vec<PredictiveDraw>,
    pub failures: Vec<FailedDraw>,
}

impl PredictiveDraws {
    fn empty(spec: &ModelSpec, days: Vec<f64>) -> Self {
        Self {
            parameter_names: spec.parameter_names(),
            derived_names: spec.derived_names(),
            compartments: spec.layout.names().iter().map(|s| s.to_string()).collect(),
            days,
            draws: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn n_requested(&self) -> usize {
        self.draws.len() + self.failures.len()
    }

    pub fn failure_rate(&self) -> f64 {
        self.failures.len() as f64 / self.n_requested().max(1) as f64
    }

    /// Simulated case series of the successful draws.
    pub fn case_series(&self) -> Vec<Vec<f64>> {
        self.draws
            .iter()
            .map(|d| d.cases.iter().map(|&c| c as f64).collect())
            .collect()
    }

    /// Latent series of `compartment` for the successful draws.
    pub fn latent_series(&self, compartment: &str) -> Option<Vec<Vec<f64>>> {
        let j = self.compartments.iter().position(|c| c == compartment)?;
        Some(
            self.draws
                .iter()
                .map(|d| d.latent.iter().map(|row| row[j]).collect())
                .collect(),
        )
    }

    /// Values of parameter or derived quantity `name` over successful draws.
    pub fn scalar(&self, name: &str) -> Option<Vec<f64>> {
        if let Some(j) = self.parameter_names.iter().position(|n| n == name) {
            return Some(self.draws.iter().map(|d| d.values[j]).collect());
        }
        let j = self.derived_names.iter().position(|n| n == name)?;
        Some(self.draws.iter().map(|d| d.derived[j]).collect())
    }
}

/// Derived quantities of one parameter draw, aligned with
/// `spec.derived_names()`. They never enter the density.
pub fn generated_quantities(spec: &ModelSpec, values: &[f64]) -> Vec<f64> {
    spec.derived_values(values)
}

/// Derived quantities per chain, ready for `diagnose::summarize`.
pub fn generated_series(set: &ChainSet, spec: &ModelSpec) -> Vec<Series> {
    let per_chain: Vec<Vec<Vec<f64>>> = set
        .chains
        .iter()
        .map(|c| c.constrained.iter().map(|v| spec.derived_values(v)).collect())
        .collect();
    spec.derived_names()
        .into_iter()
        .enumerate()
        .map(|(j, name)| Series {
            name,
            chains: per_chain.iter().map(|c| c.iter().map(|g| g[j]).collect()).collect(),
        })
        .collect()
}

fn dispersion(spec: &ModelSpec, values: &[f64]) -> f64 {
    spec.value_with_role(values, Role::InverseDispersion)
        .map_or(f64::INFINITY, |inv| 1.0 / inv)
}

fn simulate_cases(means: &[f64], phi: f64, rng: &mut Rng) -> Result<Vec<u64>, String> {
    means
        .iter()
        .map(|&m| {
            // Incidence can dip below zero by the solver tolerance.
            negbin2_rng(m.max(0.0) + PREDICTIVE_MEAN_OFFSET, phi, rng).map_err(|e| e.to_string())
        })
        .collect()
}

/// Solves on the design grid and simulates one observation set.
fn simulate_draw(
    spec: &ModelSpec,
    design: &Design,
    grid: &[f64],
    index: usize,
    values: Vec<f64>,
    rng: &mut Rng,
) -> Result<PredictiveDraw, FailedDraw> {
    let fail = |values: &[f64], reason: String| FailedDraw {
        index,
        values: values.to_vec(),
        reason,
    };
    let traj = spec.solve(&values, grid).map_err(|e| fail(&values, e.to_string()))?;
    let means = spec
        .case_means(&values, &traj, design.n_days)
        .map_err(|e| fail(&values, e.to_string()))?;
    let cases = simulate_cases(&means, dispersion(spec, &values), rng).map_err(|e| fail(&values, e))?;
    let serology_positives = match design.serology {
        None => None,
        Some(s) => {
            let row = (s.day - spec.t0) as usize - 1;
            let r = spec.layout.index_of("R").map_err(|e| fail(&values, e.to_string()))?;
            let p = (traj.states[row][r] / spec.population).clamp(0.0, 1.0);
            Some(binomial_rng(s.tested, p, rng).map_err(|e| fail(&values, e.to_string()))?)
        }
    };
    Ok(PredictiveDraw {
        index,
        derived: spec.derived_values(&values),
        latent: traj.states[..design.n_days].to_vec(),
        means,
        cases,
        serology_positives,
        values,
    })
}

fn collect(
    spec: &ModelSpec,
    design: &Design,
    parameter_draws: impl Iterator<Item = Result<Vec<f64>, FailedDraw>>,
    rng: &Rng,
) -> Result<PredictiveDraws, PredictiveError> {
    spec.validate()?;
    let grid = spec.daily_grid(design.grid_len(spec)?);
    let mut out = PredictiveDraws::empty(spec, grid[..design.n_days].to_vec());
    for (index, values) in parameter_draws.enumerate() {
        let mut draw_rng = rng.split(index as u64);
        let result = values.and_then(|v| simulate_draw(spec, design, &grid, index, v, &mut draw_rng));
        match result {
            Ok(d) => out.draws.push(d),
            Err(f) => out.failures.push(f),
        }
    }
    Ok(out)
}

/// One prior draw of every parameter; fixed parameters keep their value.
pub fn prior_draw(spec: &ModelSpec, rng: &mut Rng) -> Result<Vec<f64>, String> {
    spec.parameters
        .iter()
        .map(|p| match p.fixed {
            Some(v) => Ok(v),
            None => p.prior.sample(rng).map_err(|e| format!("{}: {e}", p.name)),
        })
        .collect()
}

/// Draws parameters from the priors and simulates observations. Draws whose
/// solve fails are recorded in `failures` and excluded from `draws`.
pub fn prior_predictive(
    spec: &ModelSpec,
    design: &Design,
    n_draws: usize,
    rng: &Rng,
) -> Result<PredictiveDraws, PredictiveError> {
    // Parameter draws use a stream family separate from the simulations.
    let prior_rng = rng.split(u64::MAX);
    let draws = (0..n_draws).map(|k| {
        let mut r = prior_rng.split(k as u64);
        prior_draw(spec, &mut r).map_err(|reason| FailedDraw {
            index: k,
            values: vec![],
            reason,
        })
    });
    collect(spec, design, draws, rng)
}

/// Simulates observations around every posterior draw, chain by chain.
pub fn posterior_predictive(
    set: &ChainSet,
    spec: &ModelSpec,
    design: &Design,
    rng: &Rng,
) -> Result<PredictiveDraws, PredictiveError> {
    check_columns(set, spec)?;
    collect(spec, design, set.draws().map(|d| Ok(d.clone())), rng)
}

fn check_columns(set: &ChainSet, spec: &ModelSpec) -> Result<(), PredictiveError> {
    if set.names != spec.parameter_names() {
        return Err(PredictiveError::Invalid(format!(
            "chains hold {:?}, the model has {:?}",
            set.names,
            spec.parameter_names()
        )));
    }
    Ok(())
}

/// Extends every posterior draw from the fitted window `t0 + 1..=t0 +
/// fit_days` to `horizon` extra days. Each draw solves the fitted window,
/// restarts the solver from the terminal state and simulates observations on
/// the new days only; the likelihood is never involved.
pub fn forecast(
    set: &ChainSet,
    spec: &ModelSpec,
    fit_days: usize,
    horizon: usize,
    rng: &Rng,
) -> Result<PredictiveDraws, PredictiveError> {
    check_columns(set, spec)?;
    spec.validate()?;
    let fit_grid = spec.daily_grid(fit_days);
    let tau = spec.t0 + fit_days as f64;
    let days: Vec<f64> = (1..=horizon).map(|j| tau + j as f64).collect();
    let mut out = PredictiveDraws::empty(spec, days.clone());
    for (index, values) in set.draws().enumerate() {
        let fail = |reason: String| FailedDraw {
            index,
            values: values.clone(),
            reason,
        };
        let result = (|| {
            let terminal = if fit_days == 0 {
                spec.initial_state(values)
            } else {
                let fit = spec.solve(values, &fit_grid).map_err(|e| fail(e.to_string()))?;
                fit.states.last().expect("non-empty grid").clone()
            };
            let states = if horizon == 0 {
                Vec::new()
            } else {
                spec.solve_from(values, tau, Some(&terminal), &days)
                    .map_err(|e| fail(e.to_string()))?
                    .states
            };
            let means = spec.case_means_from(values, &terminal, &states);
            let mut draw_rng = rng.split(index as u64);
            let cases = simulate_cases(&means, dispersion(spec, values), &mut draw_rng).map_err(fail)?;
            Ok(PredictiveDraw {
                index,
                values: values.clone(),
                derived: spec.derived_values(values),
                latent: states,
                means,
                cases,
                serology_positives: None,
            })
        })();
        match result {
            Ok(d) => out.draws.push(d),
            Err(f) => out.failures.push(f),
        }
    }
    Ok(out)
}

/// Per-day quantiles of a set of equally long series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ribbon {
    pub probs: Vec<f64>,
    /// `quantiles[day][k]` is the `probs[k]` quantile on that day.
    pub quantiles: Vec<Vec<f64>>,
}

pub const RIBBON_PROBS: [f64; 3] = [0.05, 0.5, 0.95];

/// Type-7 quantiles of `series` day by day.
pub fn ribbon(series: &[Vec<f64>], probs: &[f64]) -> Ribbon {
    let days = series.first().map_or(0, |s| s.len());
    let quantiles = (0..days)
        .map(|d| {
            let column: Vec<f64> = series.iter().map(|s| s[d]).collect();
            quantiles(&column, probs)
        })
        .collect();
    Ribbon {
        probs: probs.to_vec(),
        quantiles,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub name: String,
    pub truth: f64,
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefitReport {
    pub data: ObservedData,
    pub rows: Vec<RecoveryRow>,
    pub diagnostics: DiagnosticsReport,
}

impl RefitReport {
    pub fn all_covered(&self) -> bool {
        self.rows.iter().all(|r| r.covered)
    }
}

/// Simulates one dataset at `truth` (all parameter values, in model order),
/// fits it and reports whether each true value lies in its central 95%
/// posterior interval. Fixed parameters have a degenerate interval.
pub fn simulate_and_refit(
    spec: &ModelSpec,
    truth: &[f64],
    design: &Design,
    rng: &Rng,
    config: &SamplerConfig,
) -> Result<RefitReport, PredictiveError> {
    if truth.len() != spec.parameters.len() {
        return Err(PredictiveError::Invalid(format!(
            "{} true values for {} parameters",
            truth.len(),
            spec.parameters.len()
        )));
    }
    let simulated = collect(spec, design, std::iter::once(Ok(truth.to_vec())), rng)?;
    let Some(draw) = simulated.draws.into_iter().next() else {
        return Err(PredictiveError::Invalid(format!(
            "simulation at the true values failed: {}",
            simulated.failures[0].reason
        )));
    };
    let data = ObservedData {
        cases: draw.cases,
        serology: design.serology.zip(draw.serology_positives).map(|(s, k)| SerologyRecord {
            day: s.day,
            positives: k,
            tested: s.tested,
        }),
    };
    let posterior = Posterior::new(spec.clone(), data.clone())?;
    let set = sample(&posterior, config)?;
    let diagnostics = summarize(&set, &generated_series(&set, spec), &[0.025, 0.5, 0.975]);
    let rows = spec
        .parameters
        .iter()
        .zip(truth)
        .map(|(p, &t)| {
            let q = &diagnostics.row(&p.name).expect("every parameter is summarized").quantiles;
            RecoveryRow {
                name: p.name.clone(),
                truth: t,
                lower: q[0],
                median: q[1],
                upper: q[2],
                covered: q[0] <= t && t <= q[2],
            }
        })
        .collect();
    Ok(RefitReport {
        data,
        rows,
        diagnostics,
    })
}
