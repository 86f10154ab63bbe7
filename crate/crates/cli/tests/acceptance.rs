//! Acceptance suite: one `[PASS]`, `[FAIL]` or `[SKIP]` line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout. The
//! process fails when a criterion fails that is not listed in
//! `KNOWN_FAILURES`; each entry there is analysed in the decisions ledger.

use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use epiflow::diagnose::{ess, split_rhat, summarize, DiagnosticsReport, DEFAULT_PROBS};
use epiflow::models::{Seir, SeirInputs, Sir, SirInputs};
use epiflow::nuts::{sample, ChainSet, SamplerConfig};
use epiflow::ode::{
    solve_linear_expm, solve_rk45, solve_with_sensitivities, OdeInputs, OdeSystem, SolveRequest,
};
use epiflow::predictive::{generated_series, prior_draw, simulate_and_refit, Design};
use epiflow::prob::Rng;
use epiflow::target::{
    LogDensity, ModelSpec, ObservedData, Posterior, Preset, PresetConfig, Rejection, SerologyRecord,
    SolverSettings,
};
use epiflow_cli::data::load_cases;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Criteria allowed to fail: the required value contradicts the specified
/// prior (P(γ ≤ 1) is 0.854 under the truncated Normal(0.4, 0.5)).
const KNOWN_FAILURES: &[u32] = &[3];

const N: u64 = 763;
const SEED: u64 = 1;

struct Outcome {
    id: u32,
    status: Status,
    detail: String,
}

#[derive(PartialEq)]
enum Status {
    Pass,
    Fail,
    Skip,
}

fn verdict(id: u32, pass: bool, detail: String) -> Outcome {
    Outcome {
        id,
        status: if pass { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn report(o: &Outcome, seconds: f64) {
    let tag = match o.status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Skip => "SKIP",
    };
    let mut out = std::io::stdout().lock();
    writeln!(out, "[{tag}] criterion {}: {} ({seconds:.1} s)", o.id, o.detail).unwrap();
    out.flush().unwrap();
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

/// `‖a − b‖∞ / max(‖b‖∞, 1)`.
fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    diff / b.iter().map(|y| y.abs()).fold(1.0, f64::max)
}

fn boarding_school_cases() -> Vec<u64> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/influenza_england_1978.csv");
    load_cases(&path).expect("bundled fixture").counts
}

fn sir_spec() -> ModelSpec {
    Preset::SirPrevalence.build(&PresetConfig::new(N, 0.0)).unwrap()
}

struct Fit {
    set: ChainSet,
    report: DiagnosticsReport,
}

fn boarding_school_fit() -> Fit {
    let spec = sir_spec();
    let post = Posterior::new(
        spec.clone(),
        ObservedData {
            cases: boarding_school_cases(),
            serology: None,
        },
    )
    .unwrap();
    let config = SamplerConfig {
        seed: SEED,
        ..SamplerConfig::default()
    };
    let set = sample(&post, &config).expect("boarding-school fit");
    let report = summarize(&set, &generated_series(&set, &spec), &DEFAULT_PROBS);
    Fit { set, report }
}

fn criterion_1(fit: &Fit) -> Outcome {
    let r = &fit.report;
    let mean = |name: &str| r.row(name).unwrap().mean;
    let (beta, gamma, phi_inv) = (mean("beta"), mean("gamma"), mean("phi_inv"));
    let max_rhat = r.rows.iter().map(|row| row.rhat).fold(f64::NEG_INFINITY, f64::max);
    let min_ess = r.rows.iter().map(|row| row.n_eff).fold(f64::INFINITY, f64::min);
    let pass = within(beta, 1.73, 0.10)
        && within(gamma, 0.54, 0.05)
        && within(phi_inv, 0.14, 0.07)
        && max_rhat < 1.01
        && min_ess > 100.0
        && r.divergences == 0;
    verdict(
        1,
        pass,
        format!(
            "means beta {beta:.4}, gamma {gamma:.4}, phi_inv {phi_inv:.4}; max Rhat {max_rhat:.4}; \
             min n_eff {min_ess:.0}; divergences {}",
            r.divergences
        ),
    )
}

fn criterion_2(fit: &Fit) -> Outcome {
    // DEFAULT_PROBS is (2.5%, 25%, 50%, 75%, 97.5%).
    let q = |name: &str| {
        let row = fit.report.row(name).unwrap();
        (row.quantiles[0], row.quantiles[2], row.quantiles[4])
    };
    let (r_lo, r_med, r_hi) = q("R0");
    let (t_lo, t_med, t_hi) = q("recovery_time");
    // No median tolerance is stated; each median shares its interval's.
    let pass = within(r_med, 3.2, 0.3)
        && within(r_lo, 2.7, 0.3)
        && within(r_hi, 3.9, 0.3)
        && within(t_med, 1.8, 0.2)
        && within(t_lo, 1.6, 0.2)
        && within(t_hi, 2.2, 0.2);
    verdict(
        2,
        pass,
        format!(
            "R0 median {r_med:.3} ({r_lo:.3}, {r_hi:.3}); recovery time median {t_med:.3} ({t_lo:.3}, {t_hi:.3})"
        ),
    )
}

fn criterion_3() -> Outcome {
    let spec = sir_spec();
    let n = 100_000;
    let rng = Rng::new(SEED, 3);
    let (mut gamma_le_1, mut beta_lt_4) = (0usize, 0usize);
    for k in 0..n {
        let v = prior_draw(&spec, &mut rng.split(k)).unwrap();
        beta_lt_4 += usize::from(v[0] < 4.0);
        gamma_le_1 += usize::from(v[1] <= 1.0);
    }
    let p_gamma = gamma_le_1 as f64 / n as f64;
    let p_beta = beta_lt_4 as f64 / n as f64;
    verdict(
        3,
        within(p_gamma, 0.90, 0.01) && within(p_beta, 0.975, 0.01),
        format!("P(gamma <= 1) = {p_gamma:.4} (required 0.90 +/- 0.01); P(beta < 4) = {p_beta:.4} (required 0.975 +/- 0.01)"),
    )
}

fn criterion_4() -> (Outcome, Vec<Vec<f64>>) {
    let spec = sir_spec();
    let truth = [1.6, 0.033, 0.0007];
    let config = SamplerConfig {
        seed: SEED,
        ..SamplerConfig::default()
    };
    let report = simulate_and_refit(&spec, &truth, &Design::cases(14), &Rng::new(SEED, 4), &config)
        .expect("refit runs");
    let rows: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("{} {} in ({:.5}, {:.5})", r.name, r.truth, r.lower, r.upper))
        .collect();
    let traj = spec.solve(&truth, &spec.daily_grid(14)).unwrap().states;
    (verdict(4, report.all_covered(), rows.join("; ")), traj)
}

fn tight() -> SolverSettings {
    SolverSettings {
        rel_tol: 1e-10,
        abs_tol: 1e-10,
        max_steps: 1_000_000,
    }
}

/// A posterior for every preset; the SEIR presets get a synthetic outbreak.
fn gradient_targets() -> Vec<(Preset, Posterior)> {
    Preset::ALL
        .into_iter()
        .map(|preset| {
            let (population, t1) = if preset.is_seir() { (100_000, Some(20.0)) } else { (N, None) };
            let mut cfg = PresetConfig::new(population, 0.0);
            cfg.t1 = t1;
            cfg.solver = tight();
            let data = if preset.is_seir() {
                ObservedData {
                    cases: (0..40).map(|d| (5.0 * (0.12 * d as f64).exp()).min(400.0) as u64).collect(),
                    serology: (preset == Preset::SeirForcingSerology).then_some(SerologyRecord {
                        day: 35.0,
                        positives: 83,
                        tested: 775,
                    }),
                }
            } else {
                ObservedData {
                    cases: boarding_school_cases(),
                    serology: None,
                }
            };
            (preset, Posterior::new(preset.build(&cfg).unwrap(), data).unwrap())
        })
        .collect()
}

fn criterion_5() -> Outcome {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for (preset, post) in gradient_targets() {
        let spec = post.spec();
        let rng = Rng::new(SEED, 5);
        let mut checked = 0u64;
        let mut k = 0u64;
        // Points are prior draws; the rare draw whose solve fails is skipped.
        while checked < 10 && k < 1000 {
            let values = prior_draw(spec, &mut rng.split(k)).unwrap();
            k += 1;
            let u = spec.unconstrain(&values);
            let Ok((_, g)) = post.log_joint_and_grad(&u) else { continue };
            let fd: Result<Vec<f64>, Rejection> = (0..u.len())
                .map(|i| {
                    let (mut up, mut dn) = (u.clone(), u.clone());
                    up[i] += h;
                    dn[i] -= h;
                    Ok((post.log_joint_and_grad(&up)?.0 - post.log_joint_and_grad(&dn)?.0) / (2.0 * h))
                })
                .collect();
            let Ok(fd) = fd else { continue };
            checked += 1;
            for (i, (a, b)) in g.iter().zip(&fd).enumerate() {
                let err = (a - b).abs() / a.abs().max(1.0);
                worst = worst.max(err);
                if err > 1e-4 {
                    failures.push(format!("{preset} coordinate {i}: {a} vs {b}"));
                }
            }
        }
        if checked < 10 {
            failures.push(format!("{preset}: only {checked} points solved"));
        }
    }
    let mut detail = format!("40 points over 4 presets, worst relative error {worst:.2e}");
    if !failures.is_empty() {
        detail.push_str(&format!("; {}", failures.join("; ")));
    }
    verdict(5, failures.is_empty(), detail)
}

fn criterion_6() -> Outcome {
    let req = SolveRequest::new(vec![N as f64 - 1.0, 1.0, 0.0], 0.0, (1..=14).map(f64::from).collect())
        .tolerances(1e-10, 1e-10);
    let solve = |b: f64, g: f64| {
        solve_rk45(&Sir::default(), &SirInputs::new(b, g, N).unwrap().ode_inputs(), &req)
            .unwrap()
            .states
    };
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut counts_ok = true;
    for _ in 0..20 {
        let beta = 0.5 + 2.5 * rand::Rng::random::<f64>(&mut rng);
        let gamma = 0.1 + 0.9 * rand::Rng::random::<f64>(&mut rng);
        let inputs = SirInputs::new(beta, gamma, N).unwrap().ode_inputs();
        let sens = solve_with_sensitivities(&Sir::default(), &inputs, &req, &[false; 3]).unwrap();
        let (n, k) = (Sir::default().n_states(), Sir::default().n_varying());
        counts_ok &= sens.n_equations == n + n * k;
        for (col, theta) in [beta, gamma].into_iter().enumerate() {
            let h = 1e-4 * theta;
            let (up, dn) = if col == 0 {
                (solve(beta + h, gamma), solve(beta - h, gamma))
            } else {
                (solve(beta, gamma + h), solve(beta, gamma - h))
            };
            for (j, rows) in sens.sensitivities.iter().enumerate() {
                let analytic: Vec<f64> = rows.iter().map(|r| r[col]).collect();
                let fd: Vec<f64> = up[j].iter().zip(&dn[j]).map(|(a, b)| (a - b) / (2.0 * h)).collect();
                worst = worst.max(rel_err(&analytic, &fd));
            }
        }
    }
    verdict(
        6,
        worst <= 1e-4 && counts_ok,
        format!("20 (beta, gamma) pairs, worst relative error {worst:.2e}; equation count N + N*K = 9: {counts_ok}"),
    )
}

fn criterion_7(fit: &Fit, refit_truth: &[Vec<f64>]) -> Outcome {
    let spec = sir_spec();
    let grid = spec.daily_grid(14);
    let mut worst: f64 = 0.0;
    let mut trajectories = 1usize;
    for row in refit_truth {
        worst = worst.max((row.iter().sum::<f64>() - N as f64).abs());
    }
    for values in fit.set.draws() {
        let traj = spec.solve(values, &grid).unwrap();
        trajectories += 1;
        for row in &traj.states {
            worst = worst.max((row.iter().sum::<f64>() - N as f64).abs());
        }
    }
    verdict(
        7,
        worst <= 1e-4,
        format!("{trajectories} trajectories, max |S + I + R - 763| = {worst:.2e}"),
    )
}

struct Linear(DMatrix<f64>);

impl OdeSystem for Linear {
    fn n_states(&self) -> usize {
        self.0.nrows()
    }

    fn n_varying(&self) -> usize {
        0
    }

    fn rhs(&self, _t: f64, y: &[f64], _: &[f64], _: &[f64], _: &[i64], dy: &mut [f64]) {
        for (i, d) in dy.iter_mut().enumerate() {
            *d = (0..y.len()).map(|j| self.0[(i, j)] * y[j]).sum();
        }
    }
}

fn criterion_8() -> Outcome {
    let p = SeirInputs {
        beta: 2.1,
        gamma: 0.4,
        a: 0.18,
        eta: 0.3,
        xi: 0.9,
        nu: 7.5,
        t1: 20.0,
        p_r: 0.03,
        i0: 3.0,
        population: 8_570_000,
    };
    let ts: Vec<f64> = (1..=60).map(f64::from).collect();
    let y0 = Seir::initial_state(p.population as f64, p.i0).to_vec();
    let direct = solve_rk45(
        &Seir { varying_i0: false },
        &p.ode_inputs(false),
        &SolveRequest::new(y0.clone(), 0.0, ts.clone()).tolerances(1e-10, 1e-10),
    )
    .unwrap();
    let shifted = solve_rk45(
        &Seir { varying_i0: true },
        &p.ode_inputs(true),
        &SolveRequest::new(vec![0.0; 5], 0.0, ts.clone()).tolerances(1e-10, 1e-10),
    )
    .unwrap();
    let deviation = direct
        .states
        .iter()
        .zip(&shifted.states)
        .map(|(d, z)| {
            let y: Vec<f64> = z.iter().zip(&y0).map(|(a, b)| a + b).collect();
            rel_err(&y, d)
        })
        .fold(0.0, f64::max);

    let a = DMatrix::from_row_slice(3, 3, &[-0.5, 0.0, 0.0, 0.5, -0.2, 0.0, 0.0, 0.2, 0.0]);
    let start = [100.0, 5.0, 0.0];
    let exact = solve_linear_expm(&a, &start, &ts[..20]).unwrap();
    let rk = solve_rk45(
        &Linear(a),
        &OdeInputs::default(),
        &SolveRequest::new(start.to_vec(), 0.0, ts[..20].to_vec()).tolerances(1e-12, 1e-12),
    )
    .unwrap();
    let matrix = exact
        .states
        .iter()
        .zip(&rk.states)
        .map(|(e, r)| rel_err(r, e))
        .fold(0.0, f64::max);
    verdict(
        8,
        deviation <= 1e-7 && matrix <= 1e-7,
        format!("deviation coordinates {deviation:.2e}; matrix exponential vs RK45 {matrix:.2e}"),
    )
}

struct Funnel;

impl LogDensity for Funnel {
    fn dim(&self) -> usize {
        10
    }

    fn log_density_grad(&self, q: &[f64], g: &mut [f64]) -> Result<f64, Rejection> {
        let v = q[0];
        let n = (q.len() - 1) as f64;
        let s2 = q[1..].iter().map(|x| x * x).sum::<f64>();
        let e = (-v).exp();
        g[0] = -v / 9.0 - 0.5 * n + 0.5 * s2 * e;
        for (g, x) in g[1..].iter_mut().zip(&q[1..]) {
            *g = -x * e;
        }
        Ok(-v * v / 18.0 - 0.5 * n * v - 0.5 * s2 * e)
    }
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let iid: Vec<Vec<f64>> = (0..4).map(|_| (0..1000).map(|_| normal()).collect()).collect();
    let rhat_iid = split_rhat(&iid).unwrap();
    let shifted: Vec<Vec<f64>> = iid
        .iter()
        .enumerate()
        .map(|(c, chain)| chain.iter().map(|x| x + if c == 0 { 3.0 } else { 0.0 }).collect())
        .collect();
    let rhat_shifted = split_rhat(&shifted).unwrap();
    let rho: f64 = 0.5;
    let (chains, n) = (4, 10_000);
    let ar1: Vec<Vec<f64>> = (0..chains)
        .map(|_| {
            let mut x = normal();
            (0..n)
                .map(|_| {
                    x = rho * x + (1.0 - rho * rho).sqrt() * normal();
                    x
                })
                .collect()
        })
        .collect();
    let ess_ar1 = ess(&ar1).unwrap();
    let analytic = (chains * n) as f64 * (1.0 - rho) / (1.0 + rho);
    let ess_ratio = ess_ar1 / analytic;
    let config = SamplerConfig {
        seed: SEED,
        ..SamplerConfig::default()
    };
    let divergences = sample(&Funnel, &config).unwrap().divergences();
    verdict(
        9,
        (0.99..=1.02).contains(&rhat_iid)
            && rhat_shifted > 1.1
            && (ess_ratio - 1.0).abs() <= 0.3
            && divergences > 0,
        format!(
            "iid Rhat {rhat_iid:.4}; shifted Rhat {rhat_shifted:.3}; AR(1) ESS {ess_ar1:.0} vs {analytic:.0}; \
             funnel divergences {divergences}"
        ),
    )
}

fn criterion_10() -> Outcome {
    let (Ok(path), Ok(t1)) = (std::env::var("EPIFLOW_SWISS_CASES"), std::env::var("EPIFLOW_SWISS_T1")) else {
        return Outcome {
            id: 10,
            status: Status::Skip,
            detail: "set EPIFLOW_SWISS_CASES and EPIFLOW_SWISS_T1 to run the SEIR fit".into(),
        };
    };
    let t1: f64 = t1.parse().expect("EPIFLOW_SWISS_T1 is a number");
    let cases = load_cases(Path::new(&path)).expect("Swiss case file").counts;
    let spec = Preset::SeirForcingSerology
        .build(&PresetConfig::new(8_570_000, 0.0).with_t1(t1))
        .unwrap();
    let serology = SerologyRecord {
        day: std::env::var("EPIFLOW_SWISS_SEROLOGY_DAY")
            .ok()
            .and_then(|d| d.parse().ok())
            .unwrap_or(cases.len() as f64),
        positives: 83,
        tested: 775,
    };
    let post = Posterior::new(
        spec.clone(),
        ObservedData {
            cases,
            serology: Some(serology),
        },
    )
    .unwrap();
    let config = SamplerConfig {
        seed: SEED,
        max_treedepth: 12,
        ..SamplerConfig::default()
    };
    let set = sample(&post, &config).expect("SEIR fit");
    let report = summarize(&set, &generated_series(&set, &spec), &DEFAULT_PROBS);
    let median = |name: &str| report.row(name).unwrap().quantiles[2];
    let checks = [
        ("R0", median("R0"), 1.9, 5.2),
        ("p_reported", median("p_reported"), 0.027, 0.041),
        ("transmission_reduction", median("transmission_reduction"), 0.53, 0.92),
        ("nu", median("nu"), 6.2, 8.9),
    ];
    let pass = checks.iter().all(|&(_, m, lo, hi)| (lo..=hi).contains(&m));
    let detail = checks
        .iter()
        .map(|(name, m, lo, hi)| format!("{name} median {m:.3} in [{lo}, {hi}]"))
        .collect::<Vec<_>>()
        .join("; ");
    verdict(10, pass, detail)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn main() {
    let mut outcomes = Vec::new();
    let (fit, fit_seconds) = timed(boarding_school_fit);
    for o in [criterion_1(&fit), criterion_2(&fit)] {
        report(&o, fit_seconds);
        outcomes.push(o);
    }
    let (o, s) = timed(criterion_3);
    report(&o, s);
    outcomes.push(o);
    let ((o, refit_traj), s) = timed(criterion_4);
    report(&o, s);
    outcomes.push(o);
    for f in [criterion_5, criterion_6] {
        let (o, s) = timed(f);
        report(&o, s);
        outcomes.push(o);
    }
    let (o, s) = timed(|| criterion_7(&fit, &refit_traj));
    report(&o, s);
    outcomes.push(o);
    for f in [criterion_8, criterion_9, criterion_10] {
        let (o, s) = timed(f);
        report(&o, s);
        outcomes.push(o);
    }
    let unexpected: Vec<u32> = outcomes
        .iter()
        .filter(|o| o.status == Status::Fail && !KNOWN_FAILURES.contains(&o.id))
        .map(|o| o.id)
        .collect();
    let passed = outcomes.iter().filter(|o| o.status == Status::Pass).count();
    println!(
        "acceptance: {passed} passed, {} failed, {} skipped",
        outcomes.iter().filter(|o| o.status == Status::Fail).count(),
        outcomes.iter().filter(|o| o.status == Status::Skip).count()
    );
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
