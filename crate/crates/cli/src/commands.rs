//! The six commands. Each one writes its artifacts through one
//! [`ArtifactWriter`] so every file carries the same header.

use std::fmt::Write as _;

use epiflow::diagnose::{quantiles, summarize, DiagnosticsReport};
use epiflow::nuts::{sample, ChainSet};
use epiflow::predictive::{
    forecast, generated_series, posterior_predictive, prior_predictive, ribbon, simulate_and_refit,
    Design, PredictiveDraws, Ribbon, SerologyDesign, RIBBON_PROBS,
};
use epiflow::prob::Rng;
use epiflow::target::{ModelSpec, ObservedData, Posterior};
use serde::Serialize;

use crate::artifacts::{ArtifactWriter, Cell, Header};
use crate::config::{Command, RunConfig};
use crate::data::{parse_cases, CaseSeries, DataError};
use crate::{CliError, Outcome};

/// Stream for predictive simulation; the sampler uses stream 0.
const PREDICTIVE_STREAM: u64 = 1;

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (cases, bytes) = match &cfg.data {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| DataError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| DataError::Invalid(format!("{} is not UTF-8", path.display())))?;
            (Some(parse_cases(&text)?), bytes)
        }
        None => (None, Vec::new()),
    };
    let spec = cfg
        .model
        .build(&cfg.preset_config())
        .map_err(|e| CliError::Config(e.to_string()))?;
    match (spec.serology, cfg.serology.is_some()) {
        (true, false) => {
            return Err(CliError::Config(format!(
                "{} needs --serology-day and --serology-tested",
                cfg.model
            )))
        }
        (false, true) => return Err(CliError::Config(format!("{} has no serology channel", cfg.model))),
        _ => {}
    }
    let header = Header {
        command: cfg.command.name().to_string(),
        config_hash: cfg.hash(&bytes),
        seed: cfg.sampler.seed,
    };
    let mut w = ArtifactWriter::new(&cfg.out, header)?;
    let mut ctx = Context {
        cfg,
        spec: &spec,
        cases: cases.as_ref(),
        w: &mut w,
        outcome: Outcome::default(),
    };
    match cfg.command {
        Command::PriorCheck => ctx.prior_check()?,
        Command::Fit => {
            ctx.fit()?;
        }
        Command::PosteriorCheck => ctx.posterior_check()?,
        Command::Simulate => ctx.simulate()?,
        Command::RefitCheck => ctx.refit_check()?,
        Command::Forecast => ctx.forecast()?,
    }
    let mut outcome = ctx.outcome;
    outcome.artifacts = w.written().to_vec();
    Ok(outcome)
}

struct Context<'a> {
    cfg: &'a RunConfig,
    spec: &'a ModelSpec,
    cases: Option<&'a CaseSeries>,
    w: &'a mut ArtifactWriter,
    outcome: Outcome,
}

fn run_error(e: impl ToString) -> CliError {
    CliError::Run(e.to_string())
}

impl Context<'_> {
    fn rng(&self) -> Rng {
        Rng::new(self.cfg.sampler.seed, PREDICTIVE_STREAM)
    }

    fn observed(&self) -> Result<ObservedData, CliError> {
        let cases = self
            .cases
            .ok_or_else(|| CliError::Config(format!("{} needs --data", self.cfg.command.name())))?;
        Ok(ObservedData {
            cases: cases.counts.clone(),
            serology: self.cfg.serology,
        })
    }

    /// Simulation length: `--days`, else the length of `--data`.
    fn design(&self) -> Result<Design, CliError> {
        let n_days = self
            .cfg
            .days
            .or(self.cases.map(CaseSeries::len))
            .ok_or_else(|| CliError::Config(format!("{} needs --days or --data", self.cfg.command.name())))?;
        Ok(Design {
            n_days,
            serology: self.cfg.serology.map(|s| SerologyDesign {
                day: s.day,
                tested: s.tested,
            }),
        })
    }

    /// Every parameter value in model order: from `--params`, else the
    /// fixed value.
    fn truth(&self) -> Result<Vec<f64>, CliError> {
        for (name, _) in &self.cfg.params {
            if self.spec.index_of(name).is_none() {
                return Err(CliError::Config(format!(
                    "--params: unknown parameter `{name}` (expected one of {})",
                    self.spec.parameter_names().join(", ")
                )));
            }
        }
        self.spec
            .parameters
            .iter()
            .map(|p| {
                self.cfg
                    .params
                    .iter()
                    .rev()
                    .find(|(n, _)| *n == p.name)
                    .map(|&(_, v)| v)
                    .or(p.fixed)
                    .ok_or_else(|| CliError::Config(format!("--params: no value for `{}`", p.name)))
            })
            .collect()
    }

    fn fit(&mut self) -> Result<ChainSet, CliError> {
        let observed = self.observed()?;
        let posterior =
            Posterior::new(self.spec.clone(), observed).map_err(|e| CliError::Config(e.to_string()))?;
        let set = sample(&posterior, &self.cfg.sampler).map_err(run_error)?;
        let report = summarize(&set, &generated_series(&set, self.spec), &self.cfg.probs);
        self.write_draws(&set)?;
        self.w.text("summary.txt", &format!("{report}"))?;
        self.w.json("summary.json", &report)?;
        self.absorb(&report);
        self.outcome.report.push_str(&report.to_string());
        Ok(set)
    }

    fn absorb(&mut self, report: &DiagnosticsReport) {
        self.outcome
            .warnings
            .extend(report.warnings.iter().map(|w| w.to_string()));
    }

    fn write_draws(&mut self, set: &ChainSet) -> Result<(), CliError> {
        let mut columns: Vec<String> = vec!["chain".into(), "iteration".into()];
        columns.extend(set.names.iter().cloned());
        columns.extend(self.spec.derived_names());
        columns.extend(
            ["accept_stat__", "stepsize__", "treedepth__", "n_leapfrog__", "divergent__", "energy__"]
                .map(String::from),
        );
        let mut rows = Vec::new();
        for (c, chain) in set.chains.iter().enumerate() {
            for (i, values) in chain.constrained.iter().enumerate() {
                let mut row = vec![Cell::Count(c as u64 + 1), Cell::Count(i as u64 + 1)];
                row.extend(values.iter().map(|&v| Cell::Real(v)));
                row.extend(self.spec.derived_values(values).into_iter().map(Cell::Real));
                row.extend([
                    Cell::Real(chain.accept_stat[i]),
                    Cell::Real(chain.step_size[i]),
                    Cell::Count(chain.tree_depth[i] as u64),
                    Cell::Count(chain.n_leapfrog[i] as u64),
                    Cell::Count(chain.divergent[i] as u64),
                    Cell::Real(chain.energy[i]),
                ]);
                rows.push(row);
            }
        }
        self.w.csv("draws.csv", &columns, &rows)?;
        Ok(())
    }

    /// Writes `{prefix}_cases.csv` and one `{prefix}_{compartment}.csv` per
    /// compartment. Day `k` is `t0 + k`.
    fn write_ribbons(
        &mut self,
        prefix: &str,
        draws: &PredictiveDraws,
        first_day: usize,
        observed: Option<&[u64]>,
    ) -> Result<Ribbon, CliError> {
        let cases = ribbon(&draws.case_series(), &RIBBON_PROBS);
        self.ribbon_csv(&format!("{prefix}_cases.csv"), &cases, first_day, observed)?;
        for comp in &draws.compartments {
            let series = draws.latent_series(comp).expect("compartment of these draws");
            let r = ribbon(&series, &RIBBON_PROBS);
            self.ribbon_csv(&format!("{prefix}_{comp}.csv"), &r, first_day, None)?;
        }
        Ok(cases)
    }

    fn warn_failures(&mut self, draws: &PredictiveDraws) {
        if let Some(first) = draws.failures.first() {
            self.outcome.warnings.push(format!(
                "{} of {} simulations failed ({})",
                draws.failures.len(),
                draws.n_requested(),
                first.reason
            ));
        }
    }

    fn ribbon_csv(
        &mut self,
        name: &str,
        r: &Ribbon,
        first_day: usize,
        observed: Option<&[u64]>,
    ) -> Result<(), CliError> {
        let mut columns = vec!["day".to_string()];
        columns.extend(r.probs.iter().map(|&p| format!("q{:02}", (p * 100.0).round())));
        if observed.is_some() {
            columns.push("observed".into());
        }
        let rows: Vec<Vec<Cell>> = r
            .quantiles
            .iter()
            .enumerate()
            .map(|(j, q)| {
                let mut row = vec![Cell::Count((first_day + j) as u64)];
                row.extend(q.iter().map(|&v| Cell::Real(v)));
                if let Some(obs) = observed {
                    row.push(Cell::Count(obs[j]));
                }
                row
            })
            .collect();
        self.w.csv(name, &columns, &rows)?;
        Ok(())
    }

    fn posterior_check(&mut self) -> Result<(), CliError> {
        let set = self.fit()?;
        let observed = self.observed()?;
        let design = Design::of(&observed);
        let pp = posterior_predictive(&set, self.spec, &design, &self.rng()).map_err(run_error)?;
        let cases = self.write_ribbons("ribbon", &pp, 1, Some(&observed.cases))?;
        self.warn_failures(&pp);
        let inside = cases
            .quantiles
            .iter()
            .zip(&observed.cases)
            .filter(|(q, &y)| q[0] <= y as f64 && y as f64 <= q[2])
            .count();
        let mut text = String::new();
        writeln!(text, "posterior predictive draws: {}", pp.draws.len()).unwrap();
        writeln!(text, "failed simulations: {}", pp.failures.len()).unwrap();
        writeln!(
            text,
            "observed days inside the 90% band: {inside} of {}",
            observed.cases.len()
        )
        .unwrap();
        if let Some(s) = observed.serology {
            let sims: Vec<f64> = pp
                .draws
                .iter()
                .filter_map(|d| d.serology_positives.map(|k| k as f64))
                .collect();
            let q = quantiles(&sims, &RIBBON_PROBS);
            writeln!(
                text,
                "serology day {}: observed {} of {}, simulated 5%/50%/95% {} / {} / {}",
                s.day, s.positives, s.tested, q[0], q[1], q[2]
            )
            .unwrap();
        }
        self.w.text("posterior_check.txt", &text)?;
        self.outcome.report.push('\n');
        self.outcome.report.push_str(&text);
        Ok(())
    }

    fn forecast(&mut self) -> Result<(), CliError> {
        let set = self.fit()?;
        let fit_days = self.observed()?.cases.len();
        let f = forecast(&set, self.spec, fit_days, self.cfg.horizon, &self.rng()).map_err(run_error)?;
        self.write_ribbons("forecast", &f, fit_days + 1, None)?;
        self.warn_failures(&f);
        let text = format!(
            "forecast: {} days after day {fit_days}, {} draws, {} failed\n",
            self.cfg.horizon,
            f.draws.len(),
            f.failures.len()
        );
        self.outcome.report.push('\n');
        self.outcome.report.push_str(&text);
        Ok(())
    }

    fn prior_check(&mut self) -> Result<(), CliError> {
        let design = self.design()?;
        let pp = prior_predictive(self.spec, &design, self.cfg.draws, &self.rng()).map_err(run_error)?;
        let mut columns = vec!["draw".to_string()];
        columns.extend(pp.parameter_names.iter().cloned());
        columns.extend(pp.derived_names.iter().cloned());
        columns.push("max_cases".into());
        let rows: Vec<Vec<Cell>> = pp
            .draws
            .iter()
            .map(|d| {
                let mut row = vec![Cell::Count(d.index as u64 + 1)];
                row.extend(d.values.iter().chain(&d.derived).map(|&v| Cell::Real(v)));
                row.push(Cell::Count(d.cases.iter().copied().max().unwrap_or(0)));
                row
            })
            .collect();
        self.w.csv("prior_draws.csv", &columns, &rows)?;
        let summary = PriorSummary::new(&pp, &self.cfg.probs, self.spec.population);
        // Failed prior simulations are counted in the report, not warned on.
        self.write_ribbons("prior", &pp, 1, None)?;
        let text = summary.to_string();
        self.w.text("prior_check.txt", &text)?;
        self.w.json("prior_check.json", &summary)?;
        self.outcome.report.push_str(&text);
        Ok(())
    }

    fn simulate(&mut self) -> Result<(), CliError> {
        let truth = self.truth()?;
        let design = self.design()?;
        let mut fixed = self.spec.clone();
        for (p, &v) in fixed.parameters.iter_mut().zip(&truth) {
            p.fixed = Some(v);
        }
        let pp = prior_predictive(&fixed, &design, 1, &self.rng()).map_err(run_error)?;
        let Some(draw) = pp.draws.first() else {
            return Err(run_error(format!("simulation failed: {}", pp.failures[0].reason)));
        };
        let rows: Vec<Vec<Cell>> = draw
            .cases
            .iter()
            .enumerate()
            .map(|(j, &c)| vec![Cell::Count(j as u64 + 1), Cell::Count(c)])
            .collect();
        self.w.csv("simulated.csv", &["day".into(), "count".into()], &rows)?;
        let mut columns = vec!["day".to_string()];
        columns.extend(pp.compartments.iter().cloned());
        columns.push("mean".into());
        let latent: Vec<Vec<Cell>> = draw
            .latent
            .iter()
            .zip(&draw.means)
            .enumerate()
            .map(|(j, (state, &m))| {
                let mut row = vec![Cell::Count(j as u64 + 1)];
                row.extend(state.iter().map(|&v| Cell::Real(v)));
                row.push(Cell::Real(m));
                row
            })
            .collect();
        self.w.csv("simulated_latent.csv", &columns, &latent)?;
        if let (Some(s), Some(k)) = (design.serology, draw.serology_positives) {
            self.w.csv(
                "simulated_serology.csv",
                &["day".into(), "positives".into(), "tested".into()],
                &[vec![Cell::Real(s.day), Cell::Count(k), Cell::Count(s.tested)]],
            )?;
        }
        let total: u64 = draw.cases.iter().sum();
        self.outcome.report = format!("simulated {} days, {total} cases in total\n", draw.cases.len());
        Ok(())
    }

    fn refit_check(&mut self) -> Result<(), CliError> {
        let truth = self.truth()?;
        let design = self.design()?;
        let report =
            simulate_and_refit(self.spec, &truth, &design, &self.rng(), &self.cfg.sampler).map_err(run_error)?;
        let rows: Vec<Vec<Cell>> = report
            .data
            .cases
            .iter()
            .enumerate()
            .map(|(j, &c)| vec![Cell::Count(j as u64 + 1), Cell::Count(c)])
            .collect();
        self.w.csv("refit_data.csv", &["day".into(), "count".into()], &rows)?;
        let mut text = String::new();
        writeln!(
            text,
            "{:<16} {:>12} {:>12} {:>12} {:>12}  covered",
            "", "truth", "2.5%", "50%", "97.5%"
        )
        .unwrap();
        for r in &report.rows {
            writeln!(
                text,
                "{:<16} {:>12.5} {:>12.5} {:>12.5} {:>12.5}  {}",
                r.name,
                r.truth,
                r.lower,
                r.median,
                r.upper,
                if r.covered { "yes" } else { "no" }
            )
            .unwrap();
        }
        writeln!(text).unwrap();
        write!(text, "{}", report.diagnostics).unwrap();
        self.w.text("refit.txt", &text)?;
        self.w.json("refit.json", &report)?;
        self.absorb(&report.diagnostics);
        self.outcome.uncovered = report
            .rows
            .iter()
            .filter(|r| !r.covered)
            .map(|r| r.name.clone())
            .collect();
        self.outcome.report = text;
        Ok(())
    }
}

/// Prior predictive report: failures, scalar quantiles and how often the
/// simulated counts exceed the population.
#[derive(Debug, Serialize)]
struct PriorSummary {
    requested: usize,
    failed: usize,
    failure_rate: f64,
    probs: Vec<f64>,
    quantiles: Vec<(String, Vec<f64>)>,
    draws_exceeding_population: usize,
}

impl PriorSummary {
    fn new(pp: &PredictiveDraws, probs: &[f64], population: f64) -> Self {
        let quantiles = pp
            .parameter_names
            .iter()
            .chain(&pp.derived_names)
            .map(|name| {
                let values = pp.scalar(name).expect("name of these draws");
                let q = if values.is_empty() {
                    vec![f64::NAN; probs.len()]
                } else {
                    quantiles(&values, probs)
                };
                (name.clone(), q)
            })
            .collect();
        Self {
            requested: pp.n_requested(),
            failed: pp.failures.len(),
            failure_rate: pp.failure_rate(),
            probs: probs.to_vec(),
            quantiles,
            draws_exceeding_population: pp
                .draws
                .iter()
                .filter(|d| d.cases.iter().any(|&c| c as f64 > population))
                .count(),
        }
    }
}

impl std::fmt::Display for PriorSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "prior draws: {} requested, {} failed ({:.2}%)",
            self.requested,
            self.failed,
            100.0 * self.failure_rate
        )?;
        write!(f, "{:<16}", "")?;
        for &p in &self.probs {
            write!(f, " {:>10}", format!("{}%", 100.0 * p))?;
        }
        writeln!(f)?;
        for (name, q) in &self.quantiles {
            write!(f, "{name:<16}")?;
            for v in q {
                write!(f, " {v:>10.4}")?;
            }
            writeln!(f)?;
        }
        writeln!(
            f,
            "draws with a daily count above the population: {}",
            self.draws_exceeding_population
        )
    }
}
