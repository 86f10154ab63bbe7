//! Command-line surface and the validated run configuration.

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use epiflow::diagnose::DEFAULT_PROBS;
use epiflow::nuts::SamplerConfig;
use epiflow::target::{Preset, PresetConfig, SerologyRecord, SolverSettings};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Prior predictive simulation report.
    PriorCheck,
    /// Sample the posterior and summarize it.
    Fit,
    /// Fit, then write posterior predictive ribbons and latent trajectories.
    PosteriorCheck,
    /// Simulate a case series at given parameter values.
    Simulate,
    /// Simulate at given values, refit and check recovery.
    RefitCheck,
    /// Fit, then forecast past the data.
    Forecast,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::PriorCheck => "prior-check",
            Command::Fit => "fit",
            Command::PosteriorCheck => "posterior-check",
            Command::Simulate => "simulate",
            Command::RefitCheck => "refit-check",
            Command::Forecast => "forecast",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "epiflow", version, about = "Bayesian workflow for compartmental epidemic models")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Model preset: sir_prevalence, sir_incidence, seir_forcing or
    /// seir_forcing_serology.
    #[arg(long, default_value = "sir_prevalence")]
    pub model: String,
    /// Case series CSV with header `day,count`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub population: Option<u64>,
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    /// Day control measures start (SEIR presets).
    #[arg(long)]
    pub t1: Option<f64>,
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 1000)]
    pub warmup: usize,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub max_treedepth: usize,
    #[arg(long, default_value_t = 0.8)]
    pub target_accept: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Summary quantiles, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_PROBS)]
    pub probs: Vec<f64>,
    /// Exit 0 even when diagnostics raise warnings.
    #[arg(long)]
    pub allow_warnings: bool,
    #[arg(long)]
    pub serology_day: Option<f64>,
    #[arg(long)]
    pub serology_positives: Option<u64>,
    #[arg(long)]
    pub serology_tested: Option<u64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    /// Prior predictive draws.
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    /// Forecast days past the data.
    #[arg(long, default_value_t = 14)]
    pub horizon: usize,
    /// Days to simulate when no data file is given.
    #[arg(long)]
    pub days: Option<usize>,
    /// Parameter values for `simulate` and `refit-check`, as
    /// `name=value` pairs separated by commas.
    #[arg(long, value_delimiter = ',')]
    pub params: Vec<String>,
}

/// The validated configuration. Its JSON form, together with the bytes of
/// the data file, is hashed into every artifact header; the output location
/// and the warning policy do not change results and are left out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub model: Preset,
    /// Excluded from the hash; the file contents are hashed instead.
    #[serde(skip)]
    pub data: Option<PathBuf>,
    pub population: u64,
    pub t0: f64,
    pub t1: Option<f64>,
    pub sampler: SamplerConfig,
    pub solver: SolverSettings,
    #[serde(skip)]
    pub out: PathBuf,
    pub probs: Vec<f64>,
    #[serde(skip)]
    pub allow_warnings: bool,
    pub serology: Option<SerologyRecord>,
    pub draws: usize,
    pub horizon: usize,
    pub days: Option<usize>,
    pub params: Vec<(String, f64)>,
}

fn config_error(message: impl Into<String>) -> String {
    message.into()
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self, String> {
        let model: Preset = cli.model.parse().map_err(|e| config_error(format!("--model: {e}")))?;
        let population = cli
            .population
            .ok_or_else(|| config_error("--population is required"))?;
        if population == 0 {
            return Err(config_error("--population must be positive"));
        }
        if cli.probs.is_empty() || cli.probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(config_error("--probs must lie in [0, 1]"));
        }
        let sampler = SamplerConfig {
            n_chains: cli.chains,
            n_warmup: cli.warmup,
            n_sampling: cli.iters,
            seed: cli.seed,
            max_treedepth: cli.max_treedepth,
            target_accept: cli.target_accept,
            ..SamplerConfig::default()
        };
        sampler.validate().map_err(|e| config_error(e.to_string()))?;
        let mut solver = SolverSettings::fitting();
        if let Some(r) = cli.rel_tol {
            solver.rel_tol = r;
        }
        if let Some(a) = cli.abs_tol {
            solver.abs_tol = a;
        }
        if !(solver.rel_tol > 0.0 && solver.abs_tol > 0.0) {
            return Err(config_error("tolerances must be positive"));
        }
        let serology = match (cli.serology_day, cli.serology_positives, cli.serology_tested) {
            (None, None, None) => None,
            (Some(day), positives, Some(tested)) => {
                let positives = positives.unwrap_or(0);
                if positives > tested {
                    return Err(config_error("--serology-positives exceeds --serology-tested"));
                }
                Some(SerologyRecord {
                    day,
                    positives,
                    tested,
                })
            }
            _ => {
                return Err(config_error(
                    "serology needs --serology-day and --serology-tested (and --serology-positives to fit)",
                ))
            }
        };
        let params = cli
            .params
            .iter()
            .map(|pair| {
                let (name, value) = pair
                    .split_once('=')
                    .ok_or_else(|| config_error(format!("--params: `{pair}` is not name=value")))?;
                let value: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| config_error(format!("--params: `{value}` is not a number")))?;
                Ok((name.trim().to_string(), value))
            })
            .collect::<Result<Vec<_>, String>>()?;
        Ok(Self {
            command: cli.command,
            model,
            data: cli.data.clone(),
            population,
            t0: cli.t0,
            t1: cli.t1,
            sampler,
            solver,
            out: cli.out.clone(),
            probs: cli.probs.clone(),
            allow_warnings: cli.allow_warnings,
            serology,
            draws: cli.draws,
            horizon: cli.horizon,
            days: cli.days,
            params,
        })
    }

    pub fn preset_config(&self) -> PresetConfig {
        let mut cfg = PresetConfig::new(self.population, self.t0);
        cfg.t1 = self.t1;
        cfg.solver = self.solver;
        cfg
    }

    /// SHA-256 over the configuration JSON and the data bytes, in hex.
    pub fn hash(&self, data: &[u8]) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("config serializes"));
        h.update([0u8]);
        h.update(data);
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
