//! Command-line front end.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 degenerate input
//! (ambiguous true tree, collapsed scale draw), 4 internal assertion.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::experiment::{
    parse_epsilon_grid, parse_networks, run_experiment, true_mst_for, ConfigFile, ExperimentReport,
    MatrixSource, OutputFormat,
};
use crate::ingest::{
    estimate_parameters, format_matrix_csv, format_vector_csv, load_fixture, load_matrix,
    load_returns_csv, prices_to_returns,
};
use crate::mst::kruskal_mst;
use crate::similarity::{true_similarity, MeanMode, NetworkKind};

#[derive(Debug, Parser)]
#[command(
    name = "mstrel",
    version,
    about = "Reliability of maximum spanning tree identification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the true maximum spanning tree of a correlation matrix.
    TrueMst(TrueMstArgs),
    /// Run the Monte Carlo sweep and write the FDR report.
    Simulate(SimulateArgs),
    /// Estimate mean vector and correlation matrix from a returns CSV.
    EstimateParams(EstimateArgs),
    /// Render a JSON report as a table.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Known,
    Sample,
}

impl From<Mode> for MeanMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Known => MeanMode::KnownMean,
            Mode::Sample => MeanMode::SampleMean,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrueMstArgs {
    /// Headerless N×N correlation CSV.
    #[arg(long, conflicts_with = "fixture")]
    pub matrix: Option<PathBuf>,
    /// Bundled matrix: paper10 or synthetic50.
    #[arg(long)]
    pub fixture: Option<String>,
    /// pearson, fechner or kendall.
    #[arg(long, default_value = "pearson")]
    pub network: String,
    /// Emit the tree as JSON instead of an edge list.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated mixture weights in [0, 1].
    #[arg(long, value_name = "a,b,c")]
    pub epsilon_grid: Option<String>,
    /// Observations per sample.
    #[arg(long)]
    pub n: Option<usize>,
    /// Replications per cell.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Comma-separated subset of pearson,fechner,kendall.
    #[arg(long)]
    pub networks: Option<String>,
    #[arg(long, value_enum)]
    pub fechner_mode: Option<Mode>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "MSTREL_WORKERS")]
    pub workers: Option<usize>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// CSV with header `date,TICKER1,...`.
    pub returns_csv: PathBuf,
    /// Input holds prices; convert to simple returns first.
    #[arg(long)]
    pub prices: bool,
    /// Where to write the correlation matrix; stdout when absent.
    #[arg(long)]
    pub matrix_out: Option<PathBuf>,
    /// Where to write the mean vector; stdout when absent.
    #[arg(long)]
    pub mean_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub report_json: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrueMst(a) => cmd_true_mst(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::EstimateParams(a) => cmd_estimate_params(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            fs::write(p, text).map_err(|e| Error::io(p, e))
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

pub fn cmd_true_mst(a: &TrueMstArgs) -> Result<()> {
    let lambda = match (&a.matrix, &a.fixture) {
        (Some(p), _) => load_matrix(p)?,
        (None, Some(name)) => load_fixture(name)?,
        (None, None) => {
            return Err(Error::Config {
                key: "matrix".into(),
                msg: "pass --matrix PATH or --fixture NAME".into(),
            })
        }
    };
    let kind =
        NetworkKind::parse(&a.network, MeanMode::KnownMean).map_err(|msg| Error::Config {
            key: "network".into(),
            msg,
        })?;
    let reference = true_mst_for(&lambda)?;
    let (tree, ties) = kruskal_mst(&true_similarity(&lambda, kind))?;
    if let Some(weight) = ties.ambiguous_weight {
        return Err(Error::NonUniqueTrueMst { weight });
    }
    if tree != reference {
        return Err(Error::InvalidTree(format!(
            "{kind} tree differs from the Pearson tree of the same matrix"
        )));
    }
    if a.json {
        write_output(None, &(serde_json::to_string(&tree)? + "\n"))?;
    } else {
        write_output(None, &tree.to_edge_list())?;
    }
    if !ties.groups.is_empty() {
        eprintln!(
            "{} tie groups among true weights, none affecting the tree",
            ties.groups.len()
        );
    }
    if kind != NetworkKind::Pearson {
        eprintln!("{kind} true tree equals the Pearson true tree");
    }
    Ok(())
}

fn simulate_config(a: &SimulateArgs) -> Result<ConfigFile> {
    let mut c = match &a.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if let Some(g) = &a.epsilon_grid {
        c.epsilon_grid = parse_epsilon_grid(g)?;
    }
    if let Some(n) = a.n {
        c.n_obs = n;
    }
    if let Some(s) = a.reps {
        c.replications = s;
    }
    if let Some(n) = &a.networks {
        c.networks = parse_networks(n)?;
    }
    if let Some(m) = a.fechner_mode {
        c.fechner_mode = m.into();
    }
    if let Some(p) = &a.out {
        c.output_path = Some(p.clone());
    }
    if let Some(f) = a.format {
        c.output_format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    Ok(c)
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let file = simulate_config(a)?;
    let config = file.to_experiment()?;
    let report = match a.workers {
        Some(0) => {
            return Err(Error::Config {
                key: "workers".into(),
                msg: "must be at least 1".into(),
            })
        }
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config {
                key: "workers".into(),
                msg: e.to_string(),
            })?
            .install(|| run_experiment(&config))?,
        None => run_experiment(&config)?,
    };
    let text = match file.output_format {
        OutputFormat::Csv => report.to_csv(),
        OutputFormat::Json => report.to_json()?,
    };
    write_output(file.output_path.as_deref(), &text)?;
    if let MatrixSource::Path(p) = &file.matrix {
        eprintln!("matrix {}", p.display());
    }
    eprintln!(
        "{} cells, S={}, n={}, {:.1}s",
        report.cells.len(),
        config.replications,
        config.n_obs,
        report.elapsed_seconds
    );
    Ok(())
}

pub fn cmd_estimate_params(a: &EstimateArgs) -> Result<()> {
    let mut table = load_returns_csv(&a.returns_csv)?;
    if a.prices {
        table = prices_to_returns(&table)?;
    }
    let (mean, lambda) = estimate_parameters(&table)?;
    let matrix_text = format_matrix_csv(&lambda.rows());
    let mean_text = format_vector_csv(mean.as_slice());
    match (&a.matrix_out, &a.mean_out) {
        (None, None) => write_output(None, &format!("{matrix_text}\n{mean_text}")),
        (m, u) => {
            write_output(m.as_deref(), &matrix_text)?;
            write_output(u.as_deref(), &mean_text)
        }
    }?;
    eprintln!("tickers: {}", table.tickers.join(","));
    Ok(())
}

pub fn cmd_report(a: &ReportArgs) -> Result<()> {
    let text = crate::ingest::read_text(&a.report_json)?;
    let report = ExperimentReport::from_json(&text)?;
    write_output(None, &report.render_table())
}
