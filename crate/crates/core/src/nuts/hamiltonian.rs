use rand_distr::{Distribution, StandardNormal};

use crate::prob::Rng;
use crate::target::{LogDensity, Rejection};

/// Position, momentum and the cached log density and gradient at the
/// position. A rejected position carries `log_density = -∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub log_density: f64,
    pub grad: Vec<f64>,
}

impl PhasePoint {
    /// Evaluates the target at `q` with zero momentum.
    pub fn new<T: LogDensity + ?Sized>(target: &T, q: Vec<f64>) -> Result<Self, Rejection> {
        let mut grad = vec![0.0; q.len()];
        let log_density = target.log_density_grad(&q, &mut grad)?;
        Ok(Self {
            p: vec![0.0; q.len()],
            q,
            log_density,
            grad,
        })
    }

    pub fn kinetic(&self, inv_metric: &[f64]) -> f64 {
        0.5 * self
            .p
            .iter()
            .zip(inv_metric)
            .map(|(p, m)| p * p * m)
            .sum::<f64>()
    }

    /// Total energy; `+∞` at a rejected position.
    pub fn hamiltonian(&self, inv_metric: &[f64]) -> f64 {
        let h = -self.log_density + self.kinetic(inv_metric);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    /// `M⁻¹ p`.
    pub fn velocity(&self, inv_metric: &[f64]) -> Vec<f64> {
        self.p.iter().zip(inv_metric).map(|(p, m)| p * m).collect()
    }

    pub fn sample_momentum(&mut self, inv_metric: &[f64], rng: &mut Rng) {
        for (p, m) in self.p.iter_mut().zip(inv_metric) {
            let z: f64 = StandardNormal.sample(rng);
            *p = z / m.sqrt();
        }
    }
}

/// One leapfrog step of size `step_size` (negative integrates backward).
///
/// A target rejection at the new position leaves `log_density = -∞`, which
/// makes the Hamiltonian infinite.
pub fn leapfrog<T: LogDensity + ?Sized>(
    target: &T,
    z: &mut PhasePoint,
    step_size: f64,
    inv_metric: &[f64],
) {
    let half = 0.5 * step_size;
    for (p, g) in z.p.iter_mut().zip(&z.grad) {
        *p += half * g;
    }
    for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(inv_metric) {
        *q += step_size * m * p;
    }
    match target.log_density_grad(&z.q, &mut z.grad) {
        Ok(v) if v.is_finite() => {
            z.log_density = v;
            for (p, g) in z.p.iter_mut().zip(&z.grad) {
                *p += half * g;
            }
        }
        _ => z.log_density = f64::NEG_INFINITY,
    }
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Generalized no-U-turn criterion over a subtree with summed momentum `rho`.
fn no_u_turn(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

/// Outcome of one NUTS transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub point: PhasePoint,
    pub accept_stat: f64,
    pub tree_depth: usize,
    pub n_leapfrog: usize,
    pub divergent: bool,
    pub energy: f64,
}

pub(crate) const MAX_DELTA_H: f64 = 1000.0;

struct TreeBuilder<'a, T: ?Sized> {
    target: &'a T,
    inv_metric: &'a [f64],
    step_size: f64,
    h0: f64,
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
}

/// Summaries of a subtree's boundary needed by the U-turn checks.
struct Edge {
    p_sharp_beg: Vec<f64>,
    p_sharp_end: Vec<f64>,
    p_beg: Vec<f64>,
    p_end: Vec<f64>,
}

impl<T: LogDensity + ?Sized> TreeBuilder<'_, T> {
    /// Extends the trajectory from `z` by `2^depth` steps in direction
    /// `sign`. Returns `None` when the subtree diverges or turns back on
    /// itself.
    #[allow(clippy::too_many_arguments)]
    fn build(
        &mut self,
        depth: usize,
        z: &mut PhasePoint,
        z_propose: &mut PhasePoint,
        rho: &mut Vec<f64>,
        log_sum_weight: &mut f64,
        sign: f64,
        rng: &mut Rng,
    ) -> Option<Edge> {
        if depth == 0 {
            leapfrog(self.target, z, sign * self.step_size, self.inv_metric);
            self.n_leapfrog += 1;
            let h = z.hamiltonian(self.inv_metric);
            if h - self.h0 > MAX_DELTA_H {
                self.divergent = true;
            }
            *log_sum_weight = log_sum_exp(*log_sum_weight, self.h0 - h);
            self.sum_metro_prob += if self.h0 - h > 0.0 {
                1.0
            } else {
                (self.h0 - h).exp()
            };
            *z_propose = z.clone();
            let p_sharp = z.velocity(self.inv_metric);
            *rho = add(rho, &z.p);
            return if self.divergent {
                None
            } else {
                Some(Edge {
                    p_sharp_beg: p_sharp.clone(),
                    p_sharp_end: p_sharp,
                    p_beg: z.p.clone(),
                    p_end: z.p.clone(),
                })
            };
        }

        let dim = z.q.len();
        let mut rho_init = vec![0.0; dim];
        let mut lsw_init = f64::NEG_INFINITY;
        let init = self.build(depth - 1, z, z_propose, &mut rho_init, &mut lsw_init, sign, rng)?;

        let mut z_propose_final = z.clone();
        let mut rho_final = vec![0.0; dim];
        let mut lsw_final = f64::NEG_INFINITY;
        let last = self.build(
            depth - 1,
            z,
            &mut z_propose_final,
            &mut rho_final,
            &mut lsw_final,
            sign,
            rng,
        )?;

        let lsw_subtree = log_sum_exp(lsw_init, lsw_final);
        *log_sum_weight = log_sum_exp(*log_sum_weight, lsw_subtree);
        if lsw_final > lsw_subtree || rng.uniform() < (lsw_final - lsw_subtree).exp() {
            *z_propose = z_propose_final;
        }

        let rho_subtree = add(&rho_init, &rho_final);
        *rho = add(rho, &rho_subtree);
        let persist = no_u_turn(&init.p_sharp_beg, &last.p_sharp_end, &rho_subtree)
            && no_u_turn(
                &init.p_sharp_beg,
                &last.p_sharp_beg,
                &add(&rho_init, &last.p_beg),
            )
            && no_u_turn(
                &init.p_sharp_end,
                &last.p_sharp_end,
                &add(&rho_final, &init.p_end),
            );
        persist.then_some(Edge {
            p_sharp_beg: init.p_sharp_beg,
            p_sharp_end: last.p_sharp_end,
            p_beg: init.p_beg,
            p_end: last.p_end,
        })
    }
}

/// One multinomial NUTS transition from `start` (momentum is resampled).
pub fn transition<T: LogDensity + ?Sized>(
    target: &T,
    start: &PhasePoint,
    step_size: f64,
    inv_metric: &[f64],
    max_depth: usize,
    rng: &mut Rng,
) -> Transition {
    let mut z = start.clone();
    z.sample_momentum(inv_metric, rng);
    let h0 = z.hamiltonian(inv_metric);
    let dim = z.q.len();

    let mut z_fwd = z.clone();
    let mut z_bck = z.clone();
    let mut z_sample = z.clone();
    let mut z_propose = z.clone();

    let p_sharp = z.velocity(inv_metric);
    // Boundary momenta: the outermost point and its inner neighbour on each side.
    let mut p_sharp_fwd_fwd = p_sharp.clone();
    let mut p_sharp_fwd_bck = p_sharp.clone();
    let mut p_sharp_bck_fwd = p_sharp.clone();
    let mut p_sharp_bck_bck = p_sharp;
    let mut p_fwd_fwd = z.p.clone();
    let mut p_fwd_bck = z.p.clone();
    let mut p_bck_fwd = z.p.clone();
    let mut p_bck_bck = z.p.clone();
    let mut rho = z.p.clone();
    let mut log_sum_weight = 0.0;

    let mut builder = TreeBuilder {
        target,
        inv_metric,
        step_size,
        h0,
        n_leapfrog: 0,
        sum_metro_prob: 0.0,
        divergent: false,
    };
    let mut depth = 0;

    while depth < max_depth {
        let mut rho_fwd = vec![0.0; dim];
        let mut rho_bck = vec![0.0; dim];
        let mut lsw_subtree = f64::NEG_INFINITY;

        let valid = if rng.uniform() > 0.5 {
            // The existing trajectory becomes the backward part.
            rho_bck.clone_from(&rho);
            p_bck_fwd.clone_from(&p_fwd_fwd);
            p_sharp_bck_fwd.clone_from(&p_sharp_fwd_fwd);
            let edge = builder.build(
                depth,
                &mut z_fwd,
                &mut z_propose,
                &mut rho_fwd,
                &mut lsw_subtree,
                1.0,
                rng,
            );
            edge.map(|e| {
                p_sharp_fwd_bck = e.p_sharp_beg;
                p_sharp_fwd_fwd = e.p_sharp_end;
                p_fwd_bck = e.p_beg;
                p_fwd_fwd = e.p_end;
            })
        } else {
            rho_fwd.clone_from(&rho);
            p_fwd_bck.clone_from(&p_bck_bck);
            p_sharp_fwd_bck.clone_from(&p_sharp_bck_bck);
            let edge = builder.build(
                depth,
                &mut z_bck,
                &mut z_propose,
                &mut rho_bck,
                &mut lsw_subtree,
                -1.0,
                rng,
            );
            edge.map(|e| {
                p_sharp_bck_fwd = e.p_sharp_beg;
                p_sharp_bck_bck = e.p_sharp_end;
                p_bck_fwd = e.p_beg;
                p_bck_bck = e.p_end;
            })
        };
        if valid.is_none() {
            break;
        }
        depth += 1;

        if lsw_subtree > log_sum_weight
            || rng.uniform() < (lsw_subtree - log_sum_weight).exp()
        {
            z_sample = z_propose.clone();
        }
        log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

        rho = add(&rho_bck, &rho_fwd);
        let persist = no_u_turn(&p_sharp_bck_bck, &p_sharp_fwd_fwd, &rho)
            && no_u_turn(&p_sharp_bck_bck, &p_sharp_fwd_bck, &add(&rho_bck, &p_fwd_bck))
            && no_u_turn(&p_sharp_bck_fwd, &p_sharp_fwd_fwd, &add(&rho_fwd, &p_bck_fwd));
        if !persist {
            break;
        }
    }

    let energy = z_sample.hamiltonian(inv_metric);
    let n_leapfrog = builder.n_leapfrog;
    Transition {
        point: z_sample,
        accept_stat: if n_leapfrog > 0 {
            builder.sum_metro_prob / n_leapfrog as f64
        } else {
            0.0
        },
        tree_depth: depth,
        n_leapfrog,
        divergent: builder.divergent,
        energy,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepSizeFailure {
    /// Every step size down to zero was rejected.
    Vanished,
    /// Acceptance stayed high past a step size of `1e7`.
    Diverged,
}

/// Step-size heuristic: double or halve `step_size` until a single leapfrog
/// step crosses an acceptance probability of 0.8.
pub fn find_initial_step_size<T: LogDensity + ?Sized>(
    target: &T,
    start: &PhasePoint,
    mut step_size: f64,
    inv_metric: &[f64],
    rng: &mut Rng,
) -> Result<f64, StepSizeFailure> {
    let threshold = 0.8f64.ln();
    let mut direction = 0.0;
    loop {
        let mut z = start.clone();
        z.sample_momentum(inv_metric, rng);
        let h0 = z.hamiltonian(inv_metric);
        leapfrog(target, &mut z, step_size, inv_metric);
        let delta_h = h0 - z.hamiltonian(inv_metric);
        if direction == 0.0 {
            direction = if delta_h > threshold { 1.0 } else { -1.0 };
        } else if (direction > 0.0 && !(delta_h > threshold))
            || (direction < 0.0 && !(delta_h < threshold))
        {
            return Ok(step_size);
        }
        step_size = if direction > 0.0 {
            2.0 * step_size
        } else {
            0.5 * step_size
        };
        if step_size > 1e7 {
            return Err(StepSizeFailure::Diverged);
        }
        if step_size == 0.0 {
            return Err(StepSizeFailure::Vanished);
        }
    }
}
