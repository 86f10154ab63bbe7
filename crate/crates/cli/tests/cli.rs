use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use epiflow_cli::data::load_cases;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/influenza_england_1978.csv")
}

fn epiflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epiflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fit(out: &Path, extra: &[&str]) -> Output {
    let data = fixture();
    let mut args = vec![
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--population",
        "763",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    epiflow(&args)
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn fixture_is_fourteen_days_within_the_population() {
    let cases = load_cases(&fixture()).unwrap();
    assert_eq!(cases.len(), 14);
    assert!(cases.counts.iter().all(|&c| c <= 763));
    assert_eq!(cases.counts.iter().max(), Some(&298));
}

#[test]
fn default_fit_writes_four_thousand_draws() {
    let dir = tempfile::tempdir().unwrap();
    let out = fit(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let draws = read(&dir.path().join("draws.csv"));
    let mut lines = draws.lines();
    assert!(lines.next().unwrap().starts_with("# epiflow fit config_hash="));
    assert!(lines.next().unwrap().starts_with("chain,iteration,beta,gamma,phi_inv,R0,recovery_time,"));
    assert_eq!(lines.count(), 4000);
    let summary: serde_json::Value = serde_json::from_str(&read(&dir.path().join("summary.json"))).unwrap();
    assert_eq!(summary["report"]["n_chains"], 4);
    assert_eq!(summary["report"]["warnings"].as_array().unwrap().len(), 0);
}

#[test]
fn single_chain_reports_rhat_unavailable_and_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = fit(dir.path(), &["--chains", "1", "--warmup", "300", "--iters", "300"]);
    assert_eq!(out.status.code(), Some(3));
    let summary = read(&dir.path().join("summary.txt"));
    assert!(summary.contains("Rhat unavailable"), "{summary}");
    // The flag suppresses the warning exit only.
    let out = fit(
        dir.path(),
        &["--chains", "1", "--warmup", "300", "--iters", "300", "--allow-warnings"],
    );
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn shuffled_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("shuffled.csv");
    std::fs::write(&path, "day,count\n1,3\n3,26\n2,8\n").unwrap();
    let out = epiflow(&[
        "fit",
        "--data",
        path.to_str().unwrap(),
        "--population",
        "763",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("day 2"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn usage_and_config_errors_exit_one() {
    assert_eq!(epiflow(&["fly"]).status.code(), Some(1));
    assert_eq!(epiflow(&["fit", "--population", "763"]).status.code(), Some(1));
    let data = fixture();
    let bad_model = epiflow(&["fit", "--data", data.to_str().unwrap(), "--population", "763", "--model", "sirs"]);
    assert_eq!(bad_model.status.code(), Some(1));
    assert_eq!(epiflow(&["--help"]).status.code(), Some(0));
}

#[test]
fn reruns_are_byte_identical_and_headers_carry_hash_and_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--warmup", "200", "--iters", "200", "--seed", "11", "--allow-warnings"];
    assert_eq!(fit(a.path(), &args).status.code(), Some(0));
    assert_eq!(fit(b.path(), &args).status.code(), Some(0));
    for name in ["draws.csv", "summary.txt", "summary.json"] {
        assert_eq!(read(&a.path().join(name)), read(&b.path().join(name)), "{name}");
    }
    let first = read(&a.path().join("draws.csv")).lines().next().unwrap().to_string();
    let hash = first
        .strip_prefix("# epiflow fit config_hash=")
        .and_then(|rest| rest.strip_suffix(" seed=11"))
        .expect("header format");
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    assert!(read(&a.path().join("summary.txt")).starts_with(&first));
    let json: serde_json::Value = serde_json::from_str(&read(&a.path().join("summary.json"))).unwrap();
    assert_eq!(json["config_hash"], hash);
    assert_eq!(json["seed"], 11);
    // A different seed changes the header.
    let c = tempfile::tempdir().unwrap();
    fit(c.path(), &["--warmup", "200", "--iters", "200", "--seed", "12"]);
    assert!(read(&c.path().join("draws.csv")).starts_with("# epiflow fit config_hash="));
    assert_ne!(read(&c.path().join("draws.csv")), read(&a.path().join("draws.csv")));
}

#[test]
fn simulated_data_feeds_back_into_fit() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let out = epiflow(&[
        "simulate",
        "--population",
        "763",
        "--days",
        "14",
        "--params",
        "beta=1.7,gamma=0.5,phi_inv=0.1",
        "--out",
        sim.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let series = load_cases(&sim.join("simulated.csv")).unwrap();
    assert_eq!(series.len(), 14);
    let latent = read(&sim.join("simulated_latent.csv"));
    assert!(latent.lines().nth(1).unwrap().starts_with("day,S,I,R,mean"));
    // Missing parameter values are configuration errors.
    let out = epiflow(&["simulate", "--population", "763", "--days", "14", "--params", "beta=1.7"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn prior_check_and_forecast_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let prior = dir.path().join("prior");
    let out = epiflow(&[
        "prior-check",
        "--population",
        "763",
        "--days",
        "14",
        "--draws",
        "200",
        "--out",
        prior.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let ribbon = read(&prior.join("prior_cases.csv"));
    let lines: Vec<&str> = ribbon.lines().collect();
    assert_eq!(lines[1], "day,q05,q50,q95");
    assert_eq!(lines.len(), 2 + 14);
    assert_eq!(read(&prior.join("prior_draws.csv")).lines().count(), 2 + 200);

    let fc = dir.path().join("forecast");
    let data = fixture();
    let out = epiflow(&[
        "forecast",
        "--data",
        data.to_str().unwrap(),
        "--population",
        "763",
        "--warmup",
        "300",
        "--iters",
        "300",
        "--horizon",
        "7",
        "--allow-warnings",
        "--out",
        fc.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let cases = read(&fc.join("forecast_cases.csv"));
    let days: Vec<&str> = cases.lines().skip(2).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(days, ["15", "16", "17", "18", "19", "20", "21"]);
    for comp in ["S", "I", "R"] {
        assert!(fc.join(format!("forecast_{comp}.csv")).exists());
    }
}
