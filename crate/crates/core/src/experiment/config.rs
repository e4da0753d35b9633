//! Flat `key = value` experiment files.
//!
//! ```text
//! # Table layout at n = 10
//! fixture = paper10
//! mu = zero
//! nu = 3
//! epsilon_grid = 0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1
//! n = 10
//! S = 1000
//! networks = pearson,fechner,kendall
//! fechner_mode = known
//! seed = 1
//! tie_rule = reverse
//! mixing = observation
//! output_path = table3.csv
//! output_format = csv
//! ```
//!
//! Relative paths resolve against the directory holding the file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{default_epsilon_grid, ExperimentConfig, Mixing, TieRuleKind};
use crate::error::{Error, Result};
use crate::ingest::{load_fixture, load_matrix, load_mean, read_text};
use crate::sampling::{MeanVector, MixtureModel};
use crate::similarity::{MeanMode, NetworkKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatrixSource {
    Path(PathBuf),
    Fixture(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeanSource {
    Zero,
    Path(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv|json)")),
        }
    }
}

/// Parsed settings before the matrix is loaded. Every field is public so the
/// command line can override it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub matrix: MatrixSource,
    pub mean: MeanSource,
    pub nu: u32,
    pub epsilon_grid: Vec<f64>,
    pub n_obs: usize,
    pub replications: usize,
    pub networks: Vec<String>,
    pub fechner_mode: MeanMode,
    pub seed: u64,
    pub tie_rule: TieRuleKind,
    pub mixing: Mixing,
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            matrix: MatrixSource::Fixture("paper10".into()),
            mean: MeanSource::Zero,
            nu: 3,
            epsilon_grid: default_epsilon_grid(),
            n_obs: 100,
            replications: 1000,
            networks: vec!["pearson".into(), "fechner".into(), "kendall".into()],
            fechner_mode: MeanMode::KnownMean,
            seed: 1,
            tie_rule: TieRuleKind::ReverseLexicographic,
            mixing: Mixing::PerObservation,
            output_path: None,
            output_format: OutputFormat::Csv,
        }
    }
}

fn config_err(key: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        msg: msg.into(),
    }
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| config_err(key, format!("`{value}` is not a valid number")))
}

pub fn parse_epsilon_grid(value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| {
            let e: f64 = number("epsilon_grid", v.trim())?;
            if (0.0..=1.0).contains(&e) {
                Ok(e)
            } else {
                Err(config_err("epsilon_grid", format!("{e} outside [0, 1]")))
            }
        })
        .collect()
}

pub fn parse_networks(value: &str) -> Result<Vec<String>> {
    value
        .split(',')
        .map(|v| {
            let name = v.trim().to_ascii_lowercase();
            NetworkKind::parse(&name, MeanMode::KnownMean)
                .map_err(|m| config_err("networks", m))?;
            Ok(name)
        })
        .collect()
}

pub fn parse_tie_rule(value: &str) -> Result<TieRuleKind> {
    match value {
        "lexicographic" => Ok(TieRuleKind::Lexicographic),
        "reverse" => Ok(TieRuleKind::ReverseLexicographic),
        "random" => Ok(TieRuleKind::Random),
        other => Err(config_err(
            "tie_rule",
            format!("unknown rule `{other}` (expected lexicographic|reverse|random)"),
        )),
    }
}

impl ConfigFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        Self::parse(&read_text(path)?, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut c = Self::default();
        let mut matrix_set: Option<&str> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(config_err(
                    line,
                    format!("line {}: expected `key = value`", lineno + 1),
                ));
            };
            let key = key.trim();
            let value = value.trim().trim_matches('"');
            match key {
                "matrix_path" | "fixture" => {
                    if let Some(prev) = matrix_set {
                        return Err(config_err(key, format!("conflicts with `{prev}`")));
                    }
                    c.matrix = if key == "fixture" {
                        MatrixSource::Fixture(value.to_owned())
                    } else {
                        MatrixSource::Path(base_dir.join(value))
                    };
                    matrix_set = Some(if key == "fixture" {
                        "fixture"
                    } else {
                        "matrix_path"
                    });
                }
                "mu" => {
                    if value != "zero" {
                        return Err(config_err(
                            key,
                            format!("`{value}` (expected zero, or use mu_path)"),
                        ));
                    }
                    c.mean = MeanSource::Zero;
                }
                "mu_path" => c.mean = MeanSource::Path(base_dir.join(value)),
                "nu" => {
                    c.nu = number(key, value)?;
                    if c.nu == 0 {
                        return Err(config_err(key, "must be positive"));
                    }
                }
                "epsilon_grid" => c.epsilon_grid = parse_epsilon_grid(value)?,
                "n" => c.n_obs = number(key, value)?,
                "S" => c.replications = number(key, value)?,
                "networks" => c.networks = parse_networks(value)?,
                "fechner_mode" => {
                    c.fechner_mode = value.parse().map_err(|m: String| config_err(key, m))?
                }
                "seed" => c.seed = number(key, value)?,
                "tie_rule" => c.tie_rule = parse_tie_rule(value)?,
                "mixing" => {
                    c.mixing = match value {
                        "observation" => Mixing::PerObservation,
                        "sample" => Mixing::PerSample,
                        other => {
                            return Err(config_err(
                                key,
                                format!("`{other}` (expected observation|sample)"),
                            ))
                        }
                    }
                }
                "output_path" => c.output_path = Some(base_dir.join(value)),
                "output_format" => {
                    c.output_format = value.parse().map_err(|m: String| config_err(key, m))?
                }
                other => return Err(config_err(other, "unknown key")),
            }
        }
        Ok(c)
    }

    pub fn network_kinds(&self) -> Result<Vec<NetworkKind>> {
        self.networks
            .iter()
            .map(|n| {
                NetworkKind::parse(n, self.fechner_mode).map_err(|m| config_err("networks", m))
            })
            .collect()
    }

    /// Loads Λ and μ and assembles a validated experiment.
    pub fn to_experiment(&self) -> Result<ExperimentConfig> {
        let (lambda, matrix_desc) = match &self.matrix {
            MatrixSource::Fixture(name) => (load_fixture(name)?, format!("fixture:{name}")),
            MatrixSource::Path(p) => (load_matrix(p)?, p.display().to_string()),
        };
        let (mean, mean_desc) = match &self.mean {
            MeanSource::Zero => (MeanVector::zeros(lambda.dim()), "zero".to_owned()),
            MeanSource::Path(p) => (load_mean(p)?, p.display().to_string()),
        };
        let model = MixtureModel::new(mean, lambda, 0.0, self.nu)?;
        let mut c = ExperimentConfig::new(model, self.n_obs);
        c.epsilon_grid = self.epsilon_grid.clone();
        c.replications = self.replications;
        c.networks = self.network_kinds()?;
        c.master_seed = self.seed;
        c.tie_rule = self.tie_rule;
        c.mixing = self.mixing;
        c.matrix_source = matrix_desc;
        c.mean_source = mean_desc;
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_file() {
        let text = "# comment\nfixture = paper10\nmu = zero\nnu = 5\nepsilon_grid = 0, 0.5, 1\nn = 10\nS = 7\n\
                    networks = kendall,fechner\nfechner_mode = sample\nseed = 42\ntie_rule = random\n\
                    output_path = out/t.json  # trailing\noutput_format = json\n";
        let c = ConfigFile::parse(text, Path::new("/cfg")).unwrap();
        assert_eq!(c.matrix, MatrixSource::Fixture("paper10".into()));
        assert_eq!(c.nu, 5);
        assert_eq!(c.epsilon_grid, vec![0.0, 0.5, 1.0]);
        assert_eq!((c.n_obs, c.replications, c.seed), (10, 7, 42));
        assert_eq!(c.tie_rule, TieRuleKind::Random);
        assert_eq!(c.output_path, Some(PathBuf::from("/cfg/out/t.json")));
        assert_eq!(c.output_format, OutputFormat::Json);
        assert_eq!(
            c.network_kinds().unwrap(),
            vec![
                NetworkKind::Kendall,
                NetworkKind::Fechner(MeanMode::SampleMean)
            ]
        );
        let e = c.to_experiment().unwrap();
        assert_eq!(e.model.dim(), 10);
        assert_eq!(e.matrix_source, "fixture:paper10");
    }

    #[test]
    fn errors_name_the_key() {
        let key_of = |text: &str| match ConfigFile::parse(text, Path::new(".")) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected config error, got {other:?}"),
        };
        assert_eq!(key_of("networks = pearson,spearman"), "networks");
        assert_eq!(key_of("colour = blue"), "colour");
        assert_eq!(key_of("n = ten"), "n");
        assert_eq!(key_of("epsilon_grid = 0,1.5"), "epsilon_grid");
        assert_eq!(key_of("fechner_mode = median"), "fechner_mode");
        assert_eq!(key_of("tie_rule = first"), "tie_rule");
        assert_eq!(key_of("output_format = xml"), "output_format");
        assert_eq!(key_of("mu = one"), "mu");
        assert_eq!(key_of("mixing = column"), "mixing");
        assert_eq!(
            key_of("fixture = paper10\nmatrix_path = m.csv"),
            "matrix_path"
        );
    }

    #[test]
    fn relative_paths_and_missing_files() {
        let c =
            ConfigFile::parse("matrix_path = m.csv\nmu_path = mu.csv", Path::new("/a/b")).unwrap();
        assert_eq!(c.matrix, MatrixSource::Path(PathBuf::from("/a/b/m.csv")));
        assert_eq!(c.mean, MeanSource::Path(PathBuf::from("/a/b/mu.csv")));
        assert!(matches!(c.to_experiment(), Err(Error::Io { .. })));
        let c = ConfigFile::parse("fixture = nasdaq", Path::new(".")).unwrap();
        assert!(matches!(c.to_experiment(), Err(Error::UnknownFixture(_))));
    }
}
