use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{rng_name, ExperimentConfig};
use crate::error::{Error, Result};
use crate::metrics::AggregateReport;
use crate::mst::SpanningTree;
use crate::similarity::MeanMode;

/// Aggregate for one `(network, ε)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub network: String,
    pub epsilon: f64,
    #[serde(rename = "N")]
    pub n_nodes: usize,
    #[serde(rename = "n")]
    pub n_obs: usize,
    #[serde(flatten)]
    pub aggregate: AggregateReport,
    /// Replications whose estimated tree depended on the tie order.
    pub ambiguous_tie_replications: u64,
    pub tie_rate: f64,
}

/// Everything needed to rerun a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub matrix: String,
    pub mean: String,
    #[serde(rename = "N")]
    pub n_nodes: usize,
    pub nu: u32,
    pub epsilon_grid: Vec<f64>,
    #[serde(rename = "n")]
    pub n_obs: usize,
    #[serde(rename = "S")]
    pub replications: usize,
    pub networks: Vec<String>,
    pub fechner_mode: Option<MeanMode>,
    pub seed: u64,
    pub rng: String,
    pub tie_rule: String,
    pub mixing: String,
}

impl ConfigEcho {
    pub(super) fn from_config(c: &ExperimentConfig, n_nodes: usize) -> Self {
        Self {
            matrix: c.matrix_source.clone(),
            mean: c.mean_source.clone(),
            n_nodes,
            nu: c.model.nu,
            epsilon_grid: c.epsilon_grid.clone(),
            n_obs: c.n_obs,
            replications: c.replications,
            networks: c.networks.iter().map(|k| k.name().to_owned()).collect(),
            fechner_mode: c.fechner_mode(),
            seed: c.master_seed,
            rng: rng_name().to_owned(),
            tie_rule: c.tie_rule.as_str().to_owned(),
            mixing: c.mixing.as_str().to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub software: String,
    pub config: ConfigEcho,
    pub true_tree: SpanningTree,
    /// Ordered by network, then ε as listed in the config.
    pub cells: Vec<CellReport>,
    pub elapsed_seconds: f64,
}

const CSV_COLUMNS: &str =
    "network,epsilon,N,n,S,mean_fdr,std_error,fwer,mean_acc,mean_pfer,tie_rate";

impl ExperimentReport {
    pub fn cell(&self, network: &str, epsilon: f64) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.network == network && c.epsilon == epsilon)
    }

    /// Cells of one network in grid order.
    pub fn profile(&self, network: &str) -> Vec<&CellReport> {
        self.cells.iter().filter(|c| c.network == network).collect()
    }

    /// CSV with `#` metadata lines. Contains no timing, so equal configs give
    /// byte-identical files.
    pub fn to_csv(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.software);
        let _ = writeln!(
            out,
            "# matrix={} mean={} nu={} mixing={}",
            c.matrix, c.mean, c.nu, c.mixing
        );
        let grid: Vec<String> = c.epsilon_grid.iter().map(f64::to_string).collect();
        let _ = writeln!(
            out,
            "# seed={} rng={} tie_rule={} fechner_mode={} epsilon_grid={}",
            c.seed,
            c.rng,
            c.tie_rule,
            c.fechner_mode.map_or("none", MeanMode::as_str),
            grid.join(";"),
        );
        let edges: Vec<String> = self
            .true_tree
            .edges()
            .iter()
            .map(|(i, j)| format!("{}-{}", i + 1, j + 1))
            .collect();
        let _ = writeln!(out, "# true_tree={}", edges.join(" "));
        out.push_str(CSV_COLUMNS);
        out.push('\n');
        for cell in &self.cells {
            let a = &cell.aggregate;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                cell.network,
                cell.epsilon,
                cell.n_nodes,
                cell.n_obs,
                a.replications,
                a.mean_fdr,
                a.std_error,
                a.fwer,
                a.mean_acc,
                a.mean_pfer,
                cell.tie_rate,
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Fixed-width table: one row per network, one column per ε, FDR to two
    /// decimals.
    pub fn render_table(&self) -> String {
        let c = &self.config;
        let mut out = format!("False discovery rate. N={}, n={}\n", c.n_nodes, c.n_obs);
        let label_width = c.networks.iter().map(String::len).max().unwrap_or(0).max(7) + 2;
        let _ = write!(out, "{:<label_width$}", "epsilon");
        for e in &c.epsilon_grid {
            let _ = write!(out, "{:>6}", format!("{e:.1}"));
        }
        out.push('\n');
        let mut omitted = Vec::new();
        for network in &c.networks {
            let cells = self.profile(network);
            if cells.is_empty() {
                omitted.push(network.as_str());
                continue;
            }
            let _ = write!(out, "{network:<label_width$}");
            for e in &c.epsilon_grid {
                match cells.iter().find(|x| x.epsilon == *e) {
                    Some(x) => {
                        let _ = write!(out, "{:>6.2}", x.aggregate.mean_fdr);
                    }
                    None => {
                        let _ = write!(out, "{:>6}", "-");
                    }
                }
            }
            out.push('\n');
        }
        for network in omitted {
            let _ = writeln!(out, "({network}: no cells in report, row omitted)");
        }
        let _ = writeln!(
            out,
            "S={} seed={} nu={} tie_rule={} mixing={}",
            c.replications, c.seed, c.nu, c.tie_rule, c.mixing
        );
        out
    }
}

/// `max |v(ε) − v(ε₀)|` over `(ε, v)` pairs, with ε₀ the smallest ε.
pub fn max_deviation_from_first(profile: &[(f64, f64)]) -> Result<f64> {
    if profile.len() < 2 {
        return Err(Error::InsufficientCells);
    }
    let base = profile
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|p| p.1)
        .unwrap_or_default();
    Ok(profile
        .iter()
        .map(|p| (p.1 - base).abs())
        .fold(0.0, f64::max))
}

/// Largest deviation of the known-mean Fechner FDR from its value at the
/// lowest ε in the report.
pub fn fechner_flatness(report: &ExperimentReport) -> Result<f64> {
    match report.config.fechner_mode {
        Some(MeanMode::KnownMean) => {}
        Some(MeanMode::SampleMean) => return Err(Error::ModeMismatch),
        None => return Err(Error::InsufficientCells),
    }
    let profile: Vec<(f64, f64)> = report
        .profile("fechner")
        .iter()
        .map(|c| (c.epsilon, c.aggregate.mean_fdr))
        .collect();
    max_deviation_from_first(&profile)
}
