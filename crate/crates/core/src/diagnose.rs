//! Convergence and efficiency diagnostics and the posterior summary table.
//!
//! Every statistic takes per-chain series; chains must have equal length.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nuts::ChainSet;

pub const RHAT_THRESHOLD: f64 = 1.01;
pub const ESS_THRESHOLD: f64 = 100.0;
pub const EBFMI_THRESHOLD: f64 = 0.3;
pub const DEFAULT_PROBS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
pub enum DiagnoseError {
    #[error("needs {needed}, got {got}")]
    InsufficientDraws { needed: String, got: String },
    #[error("chains have different lengths")]
    RaggedChains,
    #[error("draws have zero variance")]
    ZeroVariance,
    #[error("draws contain non-finite values")]
    NonFinite,
}

fn check(chains: &[Vec<f64>], min_chains: usize) -> Result<usize, DiagnoseError> {
    if chains.len() < min_chains {
        return Err(DiagnoseError::InsufficientDraws {
            needed: format!("{min_chains} chains"),
            got: format!("{}", chains.len()),
        });
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(DiagnoseError::RaggedChains);
    }
    if n < 4 {
        return Err(DiagnoseError::InsufficientDraws {
            needed: "4 draws per chain".into(),
            got: format!("{n}"),
        });
    }
    if chains.iter().flatten().any(|x| !x.is_finite()) {
        return Err(DiagnoseError::NonFinite);
    }
    Ok(n)
}

/// Halves of every chain; the middle draw of an odd-length chain is dropped.
fn split(chains: &[Vec<f64>]) -> Vec<&[f64]> {
    chains
        .iter()
        .flat_map(|c| {
            let half = c.len() / 2;
            [&c[..half], &c[c.len() - half..]]
        })
        .collect()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Potential scale reduction on split chains: `√((W(n−1)/n + B/n) / W)`.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64, DiagnoseError> {
    check(chains, 2)?;
    let seqs = split(chains);
    let n = seqs[0].len() as f64;
    let means: Vec<f64> = seqs.iter().map(|s| mean(s)).collect();
    let w = mean(&seqs.iter().map(|s| variance(s)).collect::<Vec<_>>());
    if w == 0.0 {
        return Err(DiagnoseError::ZeroVariance);
    }
    // B / n is the variance of the sequence means.
    let b_over_n = variance(&means);
    Ok(((w * (n - 1.0) / n + b_over_n) / w).sqrt())
}

/// Effective sample size from autocorrelations of the raw split-chain values
/// averaged across sequences, truncated by Geyer's initial positive sequence
/// with the monotone fix, and capped at `S·log10(S)` for `S` total draws.
/// A single chain is allowed; its halves serve as two sequences.
pub fn ess(chains: &[Vec<f64>]) -> Result<f64, DiagnoseError> {
    check(chains, 1)?;
    let seqs = split(chains);
    let m = seqs.len() as f64;
    let n = seqs[0].len();
    let nf = n as f64;
    let means: Vec<f64> = seqs.iter().map(|s| mean(s)).collect();
    let centred: Vec<Vec<f64>> = seqs
        .iter()
        .zip(&means)
        .map(|(s, mu)| s.iter().map(|x| x - mu).collect())
        .collect();
    // Mean over sequences of the biased lag-t autocovariance.
    let acov = |t: usize| -> f64 {
        centred
            .iter()
            .map(|c| c[..n - t].iter().zip(&c[t..]).map(|(a, b)| a * b).sum::<f64>() / nf)
            .sum::<f64>()
            / m
    };
    let mean_var = acov(0) * nf / (nf - 1.0);
    let var_plus = mean_var * (nf - 1.0) / nf + variance(&means);
    if var_plus == 0.0 {
        return Err(DiagnoseError::ZeroVariance);
    }
    let rho = |t: usize| 1.0 - (mean_var - acov(t)) / var_plus;

    let mut sum_pairs = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let pair = if t == 0 { 1.0 + rho(1) } else { rho(t) + rho(t + 1) };
        if !(pair > 0.0) {
            break;
        }
        let pair = pair.min(prev_pair);
        sum_pairs += pair;
        prev_pair = pair;
        t += 2;
    }
    let tau = (-1.0 + 2.0 * sum_pairs).max(1.0 / (m * nf).log10());
    let total = m * nf;
    Ok((total / tau).min(total * total.log10()))
}

/// Energy Bayesian fraction of missing information for one chain:
/// `Σ(E_t − E_{t−1})² / Σ(E_t − Ē)²`.
pub fn ebfmi(energy: &[f64]) -> f64 {
    if energy.len() < 2 {
        return f64::NAN;
    }
    let m = mean(energy);
    let num: f64 = energy.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let den: f64 = energy.iter().map(|e| (e - m).powi(2)).sum();
    if den == 0.0 {
        f64::NAN
    } else {
        num / den
    }
}

/// Type-7 quantile of ascending `sorted`: linear interpolation between order
/// statistics at `h = (n − 1)p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantiles(values: &[f64], probs: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    probs.iter().map(|&p| quantile_sorted(&sorted, p)).collect()
}

/// A named per-chain series, such as a generated quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub chains: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub se_mean: f64,
    pub sd: f64,
    pub quantiles: Vec<f64>,
    pub n_eff: f64,
    pub rhat: f64,
}

impl SummaryRow {
    /// Summarizes one series; unavailable R̂ or n_eff become NaN and the
    /// reasons are returned alongside.
    pub fn from_series(series: &Series, probs: &[f64]) -> (Self, Vec<Warning>) {
        let all: Vec<f64> = series.chains.concat();
        let mut warnings = Vec::new();
        let rhat = split_rhat(&series.chains).unwrap_or_else(|e| {
            warnings.push(Warning::RhatUnavailable {
                name: series.name.clone(),
                reason: e.to_string(),
            });
            f64::NAN
        });
        let n_eff = ess(&series.chains).unwrap_or_else(|e| {
            warnings.push(Warning::EssUnavailable {
                name: series.name.clone(),
                reason: e.to_string(),
            });
            f64::NAN
        });
        let sd = if all.len() > 1 { variance(&all).sqrt() } else { f64::NAN };
        let row = Self {
            name: series.name.clone(),
            mean: if all.is_empty() { f64::NAN } else { mean(&all) },
            se_mean: sd / n_eff.sqrt(),
            sd,
            quantiles: quantiles(&all, probs),
            n_eff,
            rhat,
        };
        if row.rhat > RHAT_THRESHOLD {
            warnings.push(Warning::HighRhat {
                name: row.name.clone(),
                rhat: row.rhat,
            });
        }
        if row.n_eff < ESS_THRESHOLD {
            warnings.push(Warning::LowEss {
                name: row.name.clone(),
                n_eff: row.n_eff,
            });
        }
        (row, warnings)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    HighRhat { name: String, rhat: f64 },
    LowEss { name: String, n_eff: f64 },
    RhatUnavailable { name: String, reason: String },
    EssUnavailable { name: String, reason: String },
    Divergences { count: usize },
    TreedepthSaturated { count: usize, max_treedepth: usize },
    LowEbfmi { chain: usize, ebfmi: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::HighRhat { name, rhat } => {
                write!(f, "{name}: Rhat {rhat:.3} exceeds {RHAT_THRESHOLD}")
            }
            Warning::LowEss { name, n_eff } => {
                write!(f, "{name}: n_eff {n_eff:.0} below {ESS_THRESHOLD}")
            }
            Warning::RhatUnavailable { name, reason } => write!(f, "{name}: Rhat unavailable ({reason})"),
            Warning::EssUnavailable { name, reason } => write!(f, "{name}: n_eff unavailable ({reason})"),
            Warning::Divergences { count } => {
                write!(f, "{count} divergent transitions after warmup")
            }
            Warning::TreedepthSaturated {
                count,
                max_treedepth,
            } => write!(f, "{count} transitions hit the maximum tree depth of {max_treedepth}"),
            Warning::LowEbfmi { chain, ebfmi } => {
                write!(f, "chain {chain}: E-BFMI {ebfmi:.3} below {EBFMI_THRESHOLD}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub probs: Vec<f64>,
    pub rows: Vec<SummaryRow>,
    pub n_chains: usize,
    pub n_draws: usize,
    pub divergences: usize,
    pub treedepth_saturations: usize,
    pub ebfmi: Vec<f64>,
    pub warnings: Vec<Warning>,
}

impl DiagnosticsReport {
    pub fn row(&self, name: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn has_warnings(&self) -> bool {
        !self.warnings.is_empty()
    }
}

/// Summarizes every sampled column of `set` followed by `quantities`, and
/// collects the sampler telemetry warnings.
pub fn summarize(set: &ChainSet, quantities: &[Series], probs: &[f64]) -> DiagnosticsReport {
    let columns = set
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| Series {
            name: name.clone(),
            chains: set.column(j),
        })
        .chain(quantities.iter().cloned());
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for series in columns {
        let (row, w) = SummaryRow::from_series(&series, probs);
        rows.push(row);
        warnings.extend(w);
    }
    let divergences = set.divergences();
    if divergences > 0 {
        warnings.push(Warning::Divergences { count: divergences });
    }
    let treedepth_saturations = set.treedepth_saturations();
    if treedepth_saturations > 0 {
        warnings.push(Warning::TreedepthSaturated {
            count: treedepth_saturations,
            max_treedepth: set.config.max_treedepth,
        });
    }
    let ebfmi: Vec<f64> = set.chains.iter().map(|c| ebfmi(&c.energy)).collect();
    for (chain, &e) in ebfmi.iter().enumerate() {
        if e < EBFMI_THRESHOLD {
            warnings.push(Warning::LowEbfmi { chain, ebfmi: e });
        }
    }
    DiagnosticsReport {
        probs: probs.to_vec(),
        rows,
        n_chains: set.n_chains(),
        n_draws: set.chains.iter().map(|c| c.len()).sum(),
        divergences,
        treedepth_saturations,
        ebfmi,
        warnings,
    }
}

fn prob_label(p: f64) -> String {
    format!("{}%", (p * 1000.0).round() / 10.0)
}

fn fixed(x: f64, digits: usize) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.digits$}")
    }
}

/// Aligned text table: `mean se_mean sd <quantiles> n_eff Rhat`, followed
/// by the sampler telemetry and the warning list.
impl fmt::Display for DiagnosticsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut header = vec![String::new(), "mean".into(), "se_mean".into(), "sd".into()];
        header.extend(self.probs.iter().map(|&p| prob_label(p)));
        header.extend(["n_eff".into(), "Rhat".into()]);
        let mut table = vec![header];
        for r in &self.rows {
            let mut line = vec![r.name.clone(), fixed(r.mean, 2), fixed(r.se_mean, 2), fixed(r.sd, 2)];
            line.extend(r.quantiles.iter().map(|&q| fixed(q, 2)));
            line.push(fixed(r.n_eff, 0));
            line.push(fixed(r.rhat, 2));
            table.push(line);
        }
        let widths: Vec<usize> = (0..table[0].len())
            .map(|j| table.iter().map(|l| l[j].len()).max().unwrap_or(0))
            .collect();
        for line in &table {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (c, w))| if j == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        writeln!(f)?;
        writeln!(f, "chains: {}, draws: {}", self.n_chains, self.n_draws)?;
        writeln!(f, "divergences: {}", self.divergences)?;
        writeln!(f, "max treedepth hits: {}", self.treedepth_saturations)?;
        let e: Vec<String> = self.ebfmi.iter().map(|&e| fixed(e, 3)).collect();
        writeln!(f, "E-BFMI: {}", e.join(" "))?;
        if self.warnings.is_empty() {
            writeln!(f, "warnings: none")
        } else {
            writeln!(f, "warnings:")?;
            self.warnings.iter().try_for_each(|w| writeln!(f, "  {w}"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_two_draws_by_hand() {
        assert_eq!(quantiles(&[3.0, 1.0], &[0.0, 0.25, 0.5, 1.0]), vec![1.0, 1.5, 2.0, 3.0]);
    }

    #[test]
    fn constant_inputs_are_degenerate() {
        let c = vec![vec![2.0; 10], vec![2.0; 10]];
        assert_eq!(split_rhat(&c), Err(DiagnoseError::ZeroVariance));
        assert_eq!(ess(&c), Err(DiagnoseError::ZeroVariance));
        assert!(ebfmi(&[1.0; 8]).is_nan());
    }

    #[test]
    fn preconditions() {
        assert!(matches!(
            split_rhat(&[vec![0.0, 1.0, 2.0, 3.0]]),
            Err(DiagnoseError::InsufficientDraws { .. })
        ));
        assert!(matches!(
            ess(&[vec![0.0, 1.0, 2.0]]),
            Err(DiagnoseError::InsufficientDraws { .. })
        ));
        assert_eq!(
            split_rhat(&[vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 2.0]]),
            Err(DiagnoseError::RaggedChains)
        );
        assert_eq!(
            ess(&[vec![0.0, 1.0, f64::NAN, 3.0]]),
            Err(DiagnoseError::NonFinite)
        );
    }

    #[test]
    fn ebfmi_of_a_linear_trend_is_small() {
        let e: Vec<f64> = (0..1000).map(|t| t as f64).collect();
        assert!(ebfmi(&e) < 1e-3);
    }

    #[test]
    fn warnings_render() {
        let w = Warning::HighRhat {
            name: "beta".into(),
            rhat: 1.2,
        };
        assert_eq!(w.to_string(), "beta: Rhat 1.200 exceeds 1.01");
        assert_eq!(prob_label(0.025), "2.5%");
        assert_eq!(prob_label(0.5), "50%");
    }
}
