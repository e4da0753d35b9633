//! Returns tables, parameter estimation and matrix fixtures.
//!
//! Returns CSV: header `date,T1,...,TN`, then one row per period with a date
//! label followed by `N` decimal returns. Missing or non-numeric cells are
//! rejected, never imputed.
//!
//! Matrix CSV: `N` rows of `N` comma-separated decimals, no header.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sampling::{CorrelationMatrix, MeanVector, SampleMatrix};
use crate::similarity::sample_pearson;

const PAPER10_CSV: &str = include_str!("../fixtures/paper10.csv");
const SYNTHETIC50_CSV: &str = include_str!("../fixtures/synthetic50.csv");

/// Names accepted by [`load_fixture`].
pub const FIXTURES: [&str; 2] = ["paper10", "synthetic50"];

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsTable {
    pub tickers: Vec<String>,
    pub dates: Vec<String>,
    /// One series per ticker.
    pub values: Vec<Vec<f64>>,
}

impl ReturnsTable {
    pub fn n_tickers(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_periods(&self) -> usize {
        self.dates.len()
    }
}

pub fn load_returns_csv(path: impl AsRef<Path>) -> Result<ReturnsTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_returns(file)
}

/// Parses a returns table. Reported rows are 1-based file lines (the header is
/// line 1); columns are 1-based fields.
pub fn read_returns<R: Read>(reader: R) -> Result<ReturnsTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(1, e))?.clone();
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    if tickers.len() < 2 {
        return Err(Error::TooSmall(tickers.len()));
    }
    let mut seen = HashSet::new();
    for (k, t) in tickers.iter().enumerate() {
        if t.is_empty() {
            return Err(Error::ParseError {
                row: 1,
                col: k + 2,
                msg: "empty ticker symbol".into(),
            });
        }
        if !seen.insert(t.as_str()) {
            return Err(Error::DuplicateTicker(t.clone()));
        }
    }

    let mut dates = Vec::new();
    let mut values = vec![Vec::new(); tickers.len()];
    for (k, record) in rdr.records().enumerate() {
        let row = k + 2;
        let record = record.map_err(|e| csv_error(row, e))?;
        if record.len() != tickers.len() + 1 {
            return Err(Error::ParseError {
                row,
                col: record.len().min(tickers.len() + 1) + 1,
                msg: format!(
                    "expected {} fields, found {}",
                    tickers.len() + 1,
                    record.len()
                ),
            });
        }
        dates.push(record[0].to_owned());
        for (c, series) in values.iter_mut().enumerate() {
            series.push(parse_cell(&record[c + 1], row, c + 2)?);
        }
    }
    if dates.len() < 2 {
        return Err(Error::TooFewRows(dates.len()));
    }
    Ok(ReturnsTable {
        tickers,
        dates,
        values,
    })
}

fn csv_error(row: usize, e: csv::Error) -> Error {
    Error::ParseError {
        row,
        col: 0,
        msg: e.to_string(),
    }
}

fn parse_cell(raw: &str, row: usize, col: usize) -> Result<f64> {
    if raw.is_empty() {
        return Err(Error::ParseError {
            row,
            col,
            msg: "empty cell".into(),
        });
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(Error::ParseError {
            row,
            col,
            msg: format!("non-finite value `{raw}`"),
        }),
        Err(e) => Err(Error::ParseError {
            row,
            col,
            msg: format!("`{raw}`: {e}"),
        }),
    }
}

/// Converts a price table to simple returns `p_t / p_{t-1} − 1`; the first
/// date is consumed.
pub fn prices_to_returns(prices: &ReturnsTable) -> Result<ReturnsTable> {
    if prices.n_periods() < 3 {
        return Err(Error::TooFewRows(prices.n_periods().saturating_sub(1)));
    }
    let mut values = Vec::with_capacity(prices.n_tickers());
    for (c, series) in prices.values.iter().enumerate() {
        if let Some(t) = series.iter().position(|&p| p <= 0.0) {
            return Err(Error::ParseError {
                row: t + 2,
                col: c + 2,
                msg: "prices must be positive".into(),
            });
        }
        values.push(series.windows(2).map(|w| w[1] / w[0] - 1.0).collect());
    }
    Ok(ReturnsTable {
        tickers: prices.tickers.clone(),
        dates: prices.dates[1..].to_vec(),
        values,
    })
}

/// Sample means and sample Pearson correlation matrix. The correlation matrix
/// is validated as is; a singular estimate is reported, not repaired.
pub fn estimate_parameters(table: &ReturnsTable) -> Result<(MeanVector, CorrelationMatrix)> {
    let n = table.n_periods() as f64;
    let means = table
        .values
        .iter()
        .map(|s| s.iter().sum::<f64>() / n)
        .collect();
    let sample = SampleMatrix::from_rows(table.values.clone())?;
    let sim = sample_pearson(&sample).map_err(|e| match e {
        Error::ZeroVariance(i) => Error::ZeroVarianceTicker(table.tickers[i].clone()),
        other => other,
    })?;
    let dim = table.n_tickers();
    let entries = (0..dim)
        .flat_map(|i| (0..dim).map(move |j| (i, j)))
        .map(|(i, j)| if i == j { 1.0 } else { sim.get(i, j) })
        .collect();
    Ok((
        MeanVector::new(means)?,
        CorrelationMatrix::from_row_major(dim, entries)?,
    ))
}

/// Parses a headerless numeric CSV into rows (1-based row/col in errors).
pub fn parse_numeric_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(k + 1, e))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| parse_cell(cell, k + 1, c + 1))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_text(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Loads and validates a correlation matrix file.
pub fn load_matrix(path: impl AsRef<Path>) -> Result<CorrelationMatrix> {
    CorrelationMatrix::from_rows(&parse_numeric_csv(&read_text(path)?)?)
}

/// Loads a mean vector: `N` decimals, comma- or newline-separated.
pub fn load_mean(path: impl AsRef<Path>) -> Result<MeanVector> {
    let rows = parse_numeric_csv(&read_text(path)?)?;
    MeanVector::new(rows.concat())
}

/// Shortest round-trip decimal rendering, one row per line.
pub fn format_matrix_csv(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

pub fn format_vector_csv(values: &[f64]) -> String {
    format_matrix_csv(&[values.to_vec()])
}

pub fn load_fixture(name: &str) -> Result<CorrelationMatrix> {
    let text = match name {
        "paper10" => PAPER10_CSV,
        "synthetic50" => SYNTHETIC50_CSV,
        other => return Err(Error::UnknownFixture(other.to_owned())),
    };
    CorrelationMatrix::from_rows(&parse_numeric_csv(text)?)
}

/// Seed of the committed `synthetic50` fixture.
pub const SYNTHETIC50_SEED: u64 = 2014;

/// Two-factor market model on 50 assets in 5 sectors of 10.
///
/// Asset `i` has a market loading `b_i ~ U(0.45, 0.80)` and a sector loading
/// `s_i ~ U(0.20, 0.50)`; off-diagonal correlations are
/// `b_i·b_j + s_i·s_j·[same sector]`. The implied idiosyncratic variance
/// `1 − b_i² − s_i²` is at least `0.11`, so the matrix is positive definite.
pub fn generate_synthetic50(seed: u64) -> Vec<Vec<f64>> {
    const N: usize = 50;
    const SECTOR: usize = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loadings: Vec<(f64, f64)> = (0..N)
        .map(|_| (rng.random_range(0.45..0.80), rng.random_range(0.20..0.50)))
        .collect();
    (0..N)
        .map(|i| {
            (0..N)
                .map(|j| {
                    if i == j {
                        return 1.0;
                    }
                    let (bi, si) = loadings[i];
                    let (bj, sj) = loadings[j];
                    let sector = if i / SECTOR == j / SECTOR {
                        si * sj
                    } else {
                        0.0
                    };
                    bi * bj + sector
                })
                .collect()
        })
        .collect()
}
