//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // matrix validation
    #[error("matrix is not square: {rows} rows, row {row} has {cols} columns")]
    NotSquare {
        rows: usize,
        row: usize,
        cols: usize,
    },
    #[error("matrix dimension {0} is too small (need at least 2)")]
    TooSmall(usize),
    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("matrix is not symmetric at ({row}, {col}): {a} vs {b}")]
    AsymmetricMatrix {
        row: usize,
        col: usize,
        a: f64,
        b: f64,
    },
    #[error("diagonal entry {index} is {value}, expected 1")]
    BadDiagonal { index: usize, value: f64 },
    #[error("matrix is not positive definite (Cholesky pivot {pivot} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },

    // sampling
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("chi-square scale draw underflowed to zero after {attempts} attempts")]
    DegenerateScale { attempts: usize },

    // estimators
    #[error("|rho| = {0} lies outside [-1, 1]")]
    DomainError(f64),
    #[error("variable {0} has zero sample variance")]
    ZeroVariance(usize),
    #[error("known-mean Fechner estimator requires a mean vector")]
    MissingMean,
    #[error("{what}: size {got} exceeds guard bound {limit}")]
    GuardExceeded {
        what: &'static str,
        got: usize,
        limit: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    // trees
    #[error("non-finite weight on edge ({i}, {j})")]
    NonFiniteWeight { i: usize, j: usize },
    #[error("invalid spanning tree: {0}")]
    InvalidTree(String),
    #[error("true MST is not unique: tied weights {weight} straddle the accept/reject boundary")]
    NonUniqueTrueMst { weight: f64 },

    // metrics / experiment
    #[error("empty input")]
    EmptyInput,
    #[error("flatness statistic requires known-mean Fechner cells")]
    ModeMismatch,
    #[error("flatness statistic needs Fechner cells at two or more epsilon values")]
    InsufficientCells,
    #[error("invalid configuration key `{key}`: {msg}")]
    Config { key: String, msg: String },

    // ingest
    #[error("parse error at row {row}, column {col}: {msg}")]
    ParseError { row: usize, col: usize, msg: String },
    #[error("duplicate ticker `{0}`")]
    DuplicateTicker(String),
    #[error("too few rows: {0} (need at least 2)")]
    TooFewRows(usize),
    #[error("ticker `{0}` has zero sample variance")]
    ZeroVarianceTicker(String),
    #[error("unknown fixture `{0}` (expected paper10 or synthetic50)")]
    UnknownFixture(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonUniqueTrueMst { .. } | Error::DegenerateScale { .. } => 3,
            Error::InvalidTree(_) => 4,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
