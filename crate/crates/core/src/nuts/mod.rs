//! Multinomial no-U-turn sampling with a diagonal metric, warmup
//! adaptation and concurrent chains.

mod adapt;
mod hamiltonian;

pub use adapt::{adapt_schedule, AdaptSchedule};
pub use hamiltonian::{
    find_initial_step_size, leapfrog, transition, PhasePoint, StepSizeFailure, Transition,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prob::Rng;
use crate::target::LogDensity;
use adapt::{DualAveraging, Welford};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("chain {chain}: no finite starting point in {attempts} attempts")]
    InitializationFailed { chain: usize, attempts: usize },
    #[error("chain {chain}: no step size gives acceptable transitions")]
    AllRejected { chain: usize },
    #[error("chain {chain}: step size search diverged; the target looks improper")]
    ImproperTarget { chain: usize },
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub n_warmup: usize,
    pub n_sampling: usize,
    pub seed: u64,
    pub max_treedepth: usize,
    pub target_accept: f64,
    /// Initial values are drawn uniformly from `[-init_radius, init_radius]`.
    pub init_radius: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            n_warmup: 1000,
            n_sampling: 1000,
            seed: 0,
            max_treedepth: 10,
            target_accept: 0.8,
            init_radius: 2.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SampleError> {
        let bad = |m: &str| Err(SampleError::InvalidConfig(m.into()));
        if self.n_chains == 0 || self.n_sampling == 0 {
            return bad("chains and sampling iterations must be positive");
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad("target_accept must lie in (0, 1)");
        }
        if !(self.init_radius >= 0.0 && self.init_radius.is_finite()) {
            return bad("init_radius must be non-negative");
        }
        Ok(())
    }
}

const INIT_ATTEMPTS: usize = 100;

/// Sampling-phase draws and telemetry of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    pub unconstrained: Vec<Vec<f64>>,
    pub constrained: Vec<Vec<f64>>,
    pub accept_stat: Vec<f64>,
    pub step_size: Vec<f64>,
    pub tree_depth: Vec<usize>,
    pub n_leapfrog: Vec<usize>,
    pub divergent: Vec<bool>,
    pub energy: Vec<f64>,
    /// Adapted diagonal of the inverse metric.
    pub inv_metric: Vec<f64>,
    pub warmup_divergences: usize,
}

impl ChainDraws {
    pub fn len(&self) -> usize {
        self.constrained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constrained.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSet {
    /// Names of the constrained columns.
    pub names: Vec<String>,
    pub chains: Vec<ChainDraws>,
    pub config: SamplerConfig,
}

impl ChainSet {
    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    /// Per-chain series of constrained column `index`.
    pub fn column(&self, index: usize) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.constrained.iter().map(|d| d[index]).collect())
            .collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<Vec<f64>>> {
        self.names.iter().position(|n| n == name).map(|i| self.column(i))
    }

    /// All constrained draws, chain by chain.
    pub fn draws(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.chains.iter().flat_map(|c| c.constrained.iter())
    }

    pub fn divergences(&self) -> usize {
        self.chains
            .iter()
            .map(|c| c.divergent.iter().filter(|d| **d).count())
            .sum()
    }

    pub fn treedepth_saturations(&self) -> usize {
        let max = self.config.max_treedepth;
        self.chains
            .iter()
            .map(|c| c.tree_depth.iter().filter(|d| **d >= max).count())
            .sum()
    }
}

/// Runs `config.n_chains` chains concurrently. Chain `c` uses the random
/// stream `Rng::new(seed, 0).split(c)`, so results do not depend on thread
/// scheduling.
pub fn sample<T: LogDensity + ?Sized>(
    target: &T,
    config: &SamplerConfig,
) -> Result<ChainSet, SampleError> {
    config.validate()?;
    let root = Rng::new(config.seed, 0);
    let results: Vec<Result<ChainDraws, SampleError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..config.n_chains)
            .map(|c| {
                let rng = root.split(c as u64);
                scope.spawn(move || run_chain(target, config, c, rng))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect()
    });
    let chains = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ChainSet {
        names: target.names(),
        chains,
        config: *config,
    })
}

fn initial_point<T: LogDensity + ?Sized>(
    target: &T,
    config: &SamplerConfig,
    chain: usize,
    rng: &mut Rng,
) -> Result<PhasePoint, SampleError> {
    let r = config.init_radius;
    for _ in 0..INIT_ATTEMPTS {
        let q: Vec<f64> = (0..target.dim()).map(|_| r * (2.0 * rng.uniform() - 1.0)).collect();
        if let Ok(z) = PhasePoint::new(target, q) {
            if z.log_density.is_finite() && z.grad.iter().all(|g| g.is_finite()) {
                return Ok(z);
            }
        }
    }
    Err(SampleError::InitializationFailed {
        chain,
        attempts: INIT_ATTEMPTS,
    })
}

fn run_chain<T: LogDensity + ?Sized>(
    target: &T,
    config: &SamplerConfig,
    chain: usize,
    mut rng: Rng,
) -> Result<ChainDraws, SampleError> {
    let dim = target.dim();
    let mut z = initial_point(target, config, chain, &mut rng)?;
    let mut out = ChainDraws {
        unconstrained: Vec::with_capacity(config.n_sampling),
        constrained: Vec::with_capacity(config.n_sampling),
        accept_stat: Vec::with_capacity(config.n_sampling),
        step_size: Vec::with_capacity(config.n_sampling),
        tree_depth: Vec::with_capacity(config.n_sampling),
        n_leapfrog: Vec::with_capacity(config.n_sampling),
        divergent: Vec::with_capacity(config.n_sampling),
        energy: Vec::with_capacity(config.n_sampling),
        inv_metric: vec![1.0; dim],
        warmup_divergences: 0,
    };
    if dim == 0 {
        let constrained = target.constrain(&[]);
        for _ in 0..config.n_sampling {
            out.unconstrained.push(vec![]);
            out.constrained.push(constrained.clone());
            out.accept_stat.push(1.0);
            out.step_size.push(0.0);
            out.tree_depth.push(0);
            out.n_leapfrog.push(0);
            out.divergent.push(false);
            out.energy.push(-z.log_density);
        }
        return Ok(out);
    }

    let step_search = |z: &PhasePoint, eps: f64, m: &[f64], rng: &mut Rng| {
        find_initial_step_size(target, z, eps, m, rng).map_err(|e| match e {
            StepSizeFailure::Vanished => SampleError::AllRejected { chain },
            StepSizeFailure::Diverged => SampleError::ImproperTarget { chain },
        })
    };

    let mut inv_metric = vec![1.0; dim];
    let mut step_size = step_search(&z, 1.0, &inv_metric, &mut rng)?;
    let mut dual = DualAveraging::new(step_size, config.target_accept);
    let schedule = adapt_schedule(config.n_warmup);
    let window_ends = schedule.window_ends();
    let mut welford = Welford::new(dim);

    for i in 0..config.n_warmup {
        let t = transition(target, &z, step_size, &inv_metric, config.max_treedepth, &mut rng);
        out.warmup_divergences += usize::from(t.divergent);
        z = t.point;
        step_size = dual.learn(t.accept_stat);
        if schedule.in_window(i) {
            welford.add(&z.q);
        }
        if window_ends.contains(&i) {
            inv_metric = welford.regularized_variance();
            step_size = step_search(&z, step_size, &inv_metric, &mut rng)?;
            dual.restart(step_size);
        }
    }
    if config.n_warmup > 0 {
        step_size = dual.final_step_size();
    }
    out.inv_metric.clone_from(&inv_metric);

    for _ in 0..config.n_sampling {
        let t = transition(target, &z, step_size, &inv_metric, config.max_treedepth, &mut rng);
        z = t.point;
        out.constrained.push(target.constrain(&z.q));
        out.unconstrained.push(z.q.clone());
        out.accept_stat.push(t.accept_stat);
        out.step_size.push(step_size);
        out.tree_depth.push(t.tree_depth);
        out.n_leapfrog.push(t.n_leapfrog);
        out.divergent.push(t.divergent);
        out.energy.push(t.energy);
    }
    Ok(out)
}
