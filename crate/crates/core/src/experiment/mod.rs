//! Monte Carlo driver: for each ε in the grid, draw `S` samples from the
//! mixture, identify the tree in every requested network, and average the
//! error rates against the true tree.
//!
//! Replication `r` at mixture weight ε reads the random stream
//! [`replication_stream`]`(ε, r)`; the same sample is shared by all networks.
//! Tallies are integer sums, so results do not depend on the rayon pool size.

mod config;
mod report;

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{confusion, Tally};
use crate::mst::{kruskal_mst, kruskal_mst_with, SpanningTree, TieRule};
use crate::sampling::{
    sample_mixture, sample_mixture_whole, CorrelationMatrix, MixtureModel, SeedSpec, RNG_NAME,
};
use crate::similarity::{estimate, true_similarity, MeanMode, NetworkKind};

pub use config::{
    parse_epsilon_grid, parse_networks, parse_tie_rule, ConfigFile, MatrixSource, MeanSource,
    OutputFormat,
};
pub use report::{
    fechner_flatness, max_deviation_from_first, CellReport, ConfigEcho, ExperimentReport,
};

/// Default ε grid `0.0, 0.1, …, 1.0`.
pub fn default_epsilon_grid() -> Vec<f64> {
    (0..=10).map(|k| f64::from(k) / 10.0).collect()
}

/// Tie rule applied to estimated similarity matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieRuleKind {
    Lexicographic,
    ReverseLexicographic,
    /// Seeded shuffle within tie groups, keyed by replication stream and network.
    Random,
}

impl TieRuleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TieRuleKind::Lexicographic => "lexicographic",
            TieRuleKind::ReverseLexicographic => "reverse",
            TieRuleKind::Random => "random",
        }
    }
}

/// How the mixture component is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mixing {
    /// Independent Bernoulli(ε) per observation: i.i.d. draws from the mixture density.
    PerObservation,
    /// One Bernoulli(ε) per replication, shared by all observations.
    PerSample,
}

impl Mixing {
    pub fn as_str(self) -> &'static str {
        match self {
            Mixing::PerObservation => "observation",
            Mixing::PerSample => "sample",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Λ, μ and ν; the model's own ε is ignored in favour of the grid.
    pub model: MixtureModel,
    pub epsilon_grid: Vec<f64>,
    pub n_obs: usize,
    pub replications: usize,
    pub networks: Vec<NetworkKind>,
    pub master_seed: u64,
    pub tie_rule: TieRuleKind,
    pub mixing: Mixing,
    /// Descriptions echoed into reports.
    pub matrix_source: String,
    pub mean_source: String,
}

impl ExperimentConfig {
    /// Defaults: full ε grid, `S = 1000`, all three networks with known-mean
    /// Fechner, reverse-lexicographic ties, per-observation mixing, seed 1.
    pub fn new(model: MixtureModel, n_obs: usize) -> Self {
        Self {
            model,
            epsilon_grid: default_epsilon_grid(),
            n_obs,
            replications: 1000,
            networks: vec![
                NetworkKind::Pearson,
                NetworkKind::Fechner(MeanMode::KnownMean),
                NetworkKind::Kendall,
            ],
            master_seed: 1,
            tie_rule: TieRuleKind::ReverseLexicographic,
            mixing: Mixing::PerObservation,
            matrix_source: "inline".into(),
            mean_source: "inline".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| {
            Err(Error::Config {
                key: key.into(),
                msg,
            })
        };
        if self.epsilon_grid.is_empty() {
            return bad("epsilon_grid", "empty grid".into());
        }
        if let Some(e) = self.epsilon_grid.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return bad("epsilon_grid", format!("{e} outside [0, 1]"));
        }
        for (k, e) in self.epsilon_grid.iter().enumerate() {
            if self.epsilon_grid[..k]
                .iter()
                .any(|p| epsilon_key(*p) == epsilon_key(*e))
            {
                return bad("epsilon_grid", format!("duplicate value {e}"));
            }
        }
        if self.n_obs < 2 {
            return bad("n", format!("{} < 2", self.n_obs));
        }
        if self.replications < 1 || self.replications > u32::MAX as usize {
            return bad("S", format!("{} outside [1, 2^32)", self.replications));
        }
        if self.networks.is_empty() {
            return bad("networks", "no networks requested".into());
        }
        for (k, kind) in self.networks.iter().enumerate() {
            if self.networks[..k].iter().any(|p| p.name() == kind.name()) {
                return bad("networks", format!("duplicate network {kind}"));
            }
        }
        Ok(())
    }

    /// Fechner centering in use, if Fechner is requested.
    pub fn fechner_mode(&self) -> Option<MeanMode> {
        self.networks.iter().find_map(|k| match k {
            NetworkKind::Fechner(m) => Some(*m),
            _ => None,
        })
    }
}

/// ε quantised to 1e-6; the high half of the stream id.
fn epsilon_key(epsilon: f64) -> u64 {
    (epsilon * 1e6).round() as u64
}

/// Stream id of replication `r` at mixture weight ε:
/// `round(ε·10⁶) · 2³² + r`.
pub fn replication_stream(epsilon: f64, r: usize) -> u64 {
    (epsilon_key(epsilon) << 32) | r as u64
}

/// Kruskal tree of the true Pearson similarities; by the arcsine relation it is
/// also the true tree of the Fechner and Kendall networks.
pub fn true_mst_for(lambda: &CorrelationMatrix) -> Result<SpanningTree> {
    let (tree, ties) = kruskal_mst(&true_similarity(lambda, NetworkKind::Pearson))?;
    if let Some(weight) = ties.ambiguous_weight {
        return Err(Error::NonUniqueTrueMst { weight });
    }
    Ok(tree)
}

#[derive(Debug, Clone, Copy)]
struct CellTally {
    tally: Tally,
    ambiguous_ties: u64,
}

impl CellTally {
    fn merge(mut self, other: &CellTally) -> Result<Self> {
        self.tally.merge(&other.tally)?;
        self.ambiguous_ties += other.ambiguous_ties;
        Ok(self)
    }
}

fn tie_seed(master: u64, stream: u64, kind: NetworkKind) -> u64 {
    let tag = match kind {
        NetworkKind::Pearson => 1,
        NetworkKind::Fechner(_) => 2,
        NetworkKind::Kendall => 3,
    };
    // splitmix64 finaliser
    let mut z = master ^ stream.rotate_left(21) ^ (tag << 58);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One replication: one shared sample, one tree per network.
fn replicate(
    config: &ExperimentConfig,
    model: &MixtureModel,
    true_tree: &SpanningTree,
    kinds: &[NetworkKind],
    stream: u64,
    out: &mut [CellTally],
) -> Result<()> {
    let seed = SeedSpec::new(config.master_seed, stream);
    let sample = match config.mixing {
        Mixing::PerObservation => sample_mixture(model, config.n_obs, seed)?,
        Mixing::PerSample => sample_mixture_whole(model, config.n_obs, seed)?,
    };
    for (kind, cell) in kinds.iter().zip(out.iter_mut()) {
        let sim = estimate(&sample, *kind, Some(&model.mean))?;
        let rule = match config.tie_rule {
            TieRuleKind::Lexicographic => TieRule::Lexicographic,
            TieRuleKind::ReverseLexicographic => TieRule::ReverseLexicographic,
            TieRuleKind::Random => TieRule::Random(tie_seed(config.master_seed, stream, *kind)),
        };
        let (tree, ties) = kruskal_mst_with(&sim, rule)?;
        let c = confusion(true_tree, &tree)?;
        cell.tally.push(c.fp);
        cell.ambiguous_ties += u64::from(ties.affects_result);
    }
    Ok(())
}

/// Tallies for every `(ε, kind)` pair, indexed `[ε][kind]`.
fn run_grid(
    config: &ExperimentConfig,
    true_tree: &SpanningTree,
    grid: &[f64],
    kinds: &[NetworkKind],
) -> Result<Vec<Vec<CellTally>>> {
    let models = grid
        .iter()
        .map(|&e| config.model.with_epsilon(e))
        .collect::<Result<Vec<_>>>()?;
    let n_nodes = true_tree.n_nodes();
    let empty = vec![
        CellTally {
            tally: Tally::new(n_nodes),
            ambiguous_ties: 0,
        };
        grid.len() * kinds.len()
    ];
    let s = config.replications;
    let flat = (0..grid.len() * s)
        .into_par_iter()
        .try_fold(
            || empty.clone(),
            |mut acc, job| -> Result<Vec<CellTally>> {
                let (e, r) = (job / s, job % s);
                let cells = &mut acc[e * kinds.len()..(e + 1) * kinds.len()];
                replicate(
                    config,
                    &models[e],
                    true_tree,
                    kinds,
                    replication_stream(grid[e], r),
                    cells,
                )?;
                Ok(acc)
            },
        )
        .try_reduce(
            || empty.clone(),
            |a, b| a.into_iter().zip(&b).map(|(x, y)| x.merge(y)).collect(),
        )?;
    Ok(flat
        .chunks(kinds.len())
        .map(<[CellTally]>::to_vec)
        .collect())
}

fn cell_report(kind: NetworkKind, epsilon: f64, n_obs: usize, t: &CellTally) -> Result<CellReport> {
    let aggregate = t.tally.report()?;
    Ok(CellReport {
        network: kind.name().to_owned(),
        epsilon,
        n_nodes: t.tally.n_nodes,
        n_obs,
        aggregate,
        ambiguous_tie_replications: t.ambiguous_ties,
        tie_rate: t.ambiguous_ties as f64 / t.tally.replications as f64,
    })
}

/// Single `(kind, ε)` cell. Equal to the matching cell of [`run_experiment`].
pub fn run_cell(config: &ExperimentConfig, kind: NetworkKind, epsilon: f64) -> Result<CellReport> {
    config.validate()?;
    let true_tree = true_mst_for(&config.model.lambda)?;
    let tallies = run_grid(config, &true_tree, &[epsilon], &[kind])?;
    cell_report(kind, epsilon, config.n_obs, &tallies[0][0])
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let true_tree = true_mst_for(&config.model.lambda)?;
    let tallies = run_grid(config, &true_tree, &config.epsilon_grid, &config.networks)?;
    let mut cells = Vec::with_capacity(config.networks.len() * config.epsilon_grid.len());
    for (k, kind) in config.networks.iter().enumerate() {
        for (e, &epsilon) in config.epsilon_grid.iter().enumerate() {
            cells.push(cell_report(*kind, epsilon, config.n_obs, &tallies[e][k])?);
        }
    }
    Ok(ExperimentReport {
        software: software_version(),
        config: ConfigEcho::from_config(config, true_tree.n_nodes()),
        true_tree,
        cells,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn software_version() -> String {
    format!("mstrel {}", env!("CARGO_PKG_VERSION"))
}

pub(crate) fn rng_name() -> &'static str {
    RNG_NAME
}
