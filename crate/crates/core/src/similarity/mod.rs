//! Pairwise similarity matrices: the population values implied by Λ under any
//! elliptical law, and the Pearson, Fechner and Kendall sample estimators.

mod kendall;

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{CorrelationMatrix, MeanVector, SampleMatrix};

pub use kendall::{
    sample_kendall, sample_kendall_naive, sample_kendall_naive_with_guard, NAIVE_KENDALL_GUARD,
};

/// Centering used by the Fechner estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanMode {
    /// Center by the known location vector μ.
    #[serde(rename = "known")]
    KnownMean,
    /// Center by the per-variable sample mean.
    #[serde(rename = "sample")]
    SampleMean,
}

impl MeanMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MeanMode::KnownMean => "known",
            MeanMode::SampleMean => "sample",
        }
    }
}

impl FromStr for MeanMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "known" => Ok(MeanMode::KnownMean),
            "sample" => Ok(MeanMode::SampleMean),
            other => Err(format!(
                "unknown Fechner mean mode `{other}` (expected known|sample)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NetworkKind {
    Pearson,
    Fechner(MeanMode),
    Kendall,
}

impl NetworkKind {
    /// Lower-case network name without the Fechner mode.
    pub fn name(self) -> &'static str {
        match self {
            NetworkKind::Pearson => "pearson",
            NetworkKind::Fechner(_) => "fechner",
            NetworkKind::Kendall => "kendall",
        }
    }

    /// Parses a network name; `fechner` takes the supplied mode.
    pub fn parse(name: &str, fechner_mode: MeanMode) -> std::result::Result<Self, String> {
        match name.trim().to_ascii_lowercase().as_str() {
            "pearson" => Ok(NetworkKind::Pearson),
            "fechner" => Ok(NetworkKind::Fechner(fechner_mode)),
            "kendall" => Ok(NetworkKind::Kendall),
            other => Err(format!(
                "unknown network `{other}` (expected pearson|fechner|kendall)"
            )),
        }
    }
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    True,
    Estimated,
}

/// Symmetric `N × N` weight matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    dim: usize,
    entries: Vec<f64>,
    kind: NetworkKind,
    provenance: Provenance,
}

impl SimilarityMatrix {
    /// Builds a matrix from an upper-triangle generator `f(i, j)` with `i < j`.
    pub fn from_fn(
        dim: usize,
        kind: NetworkKind,
        provenance: Provenance,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in (i + 1)..dim {
                let v = f(i, j);
                entries[i * dim + j] = v;
                entries[j * dim + i] = v;
            }
        }
        Self {
            dim,
            entries,
            kind,
            provenance,
        }
    }

    /// Wraps arbitrary weights (e.g. test fixtures) after checking symmetry.
    pub fn from_rows(rows: &[Vec<f64>], kind: NetworkKind, provenance: Provenance) -> Result<Self> {
        let dim = rows.len();
        for (row, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::NotSquare {
                    rows: dim,
                    row,
                    cols: r.len(),
                });
            }
        }
        for (i, r) in rows.iter().enumerate() {
            for (j, &a) in r.iter().enumerate().skip(i + 1) {
                let b = rows[j][i];
                // NaN weights are rejected later by the tree builder, not here.
                if a != b && !(a.is_nan() && b.is_nan()) {
                    return Err(Error::AsymmetricMatrix {
                        row: i,
                        col: j,
                        a,
                        b,
                    });
                }
            }
        }
        Ok(Self::from_fn(dim, kind, provenance, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Applies `f` to every off-diagonal entry.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self::from_fn(self.dim, self.kind, self.provenance, |i, j| {
            f(self.get(i, j))
        })
    }
}

const DOMAIN_SLACK: f64 = 1e-12;

fn check_rho(rho: f64) -> Result<f64> {
    if rho.is_nan() || rho.abs() > 1.0 + DOMAIN_SLACK {
        return Err(Error::DomainError(rho));
    }
    Ok(rho.clamp(-1.0, 1.0))
}

/// Sign similarity `1/2 + arcsin(ρ)/π` implied by a Pearson correlation.
pub fn pearson_to_sign(rho: f64) -> Result<f64> {
    Ok(0.5 + check_rho(rho)?.asin() / PI)
}

/// Fechner and Kendall correlation `(2/π)·arcsin(ρ)` implied by a Pearson
/// correlation under any elliptical law.
pub fn pearson_to_kendall(rho: f64) -> Result<f64> {
    Ok(2.0 / PI * check_rho(rho)?.asin())
}

/// Population similarity matrix of `kind` for every law in the class of Λ.
pub fn true_similarity(lambda: &CorrelationMatrix, kind: NetworkKind) -> SimilarityMatrix {
    SimilarityMatrix::from_fn(lambda.dim(), kind, Provenance::True, |i, j| {
        let rho = lambda.get(i, j);
        match kind {
            NetworkKind::Pearson => rho,
            // Validated matrices have |ρ| < 1, so the transform cannot fail.
            NetworkKind::Fechner(_) | NetworkKind::Kendall => {
                pearson_to_kendall(rho).expect("validated correlation")
            }
        }
    })
}

/// Sign of `a·b` without forming the product (which can underflow to zero).
#[inline]
pub(crate) fn product_sign(a: f64, b: f64) -> Ordering {
    let sa = a.partial_cmp(&0.0).unwrap_or(Ordering::Equal);
    let sb = b.partial_cmp(&0.0).unwrap_or(Ordering::Equal);
    match (sa, sb) {
        (Ordering::Equal, _) | (_, Ordering::Equal) => Ordering::Equal,
        (x, y) if x == y => Ordering::Greater,
        _ => Ordering::Less,
    }
}

/// Sample Pearson correlations.
pub fn sample_pearson(sample: &SampleMatrix) -> Result<SimilarityMatrix> {
    let (dim, n) = (sample.n_vars(), sample.n_obs());
    if n < 2 {
        return Err(Error::TooFewRows(n));
    }
    let mut centered = Vec::with_capacity(dim);
    let mut sums_sq = Vec::with_capacity(dim);
    for i in 0..dim {
        let x = sample.row(i);
        let mean = x.iter().sum::<f64>() / n as f64;
        let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let ss: f64 = c.iter().map(|v| v * v).sum();
        if ss == 0.0 {
            return Err(Error::ZeroVariance(i));
        }
        centered.push(c);
        sums_sq.push(ss);
    }
    Ok(SimilarityMatrix::from_fn(
        dim,
        NetworkKind::Pearson,
        Provenance::Estimated,
        |i, j| {
            let cross: f64 = centered[i]
                .iter()
                .zip(&centered[j])
                .map(|(a, b)| a * b)
                .sum();
            (cross / (sums_sq[i] * sums_sq[j]).sqrt()).clamp(-1.0, 1.0)
        },
    ))
}

/// Number of observations whose centered product is strictly positive, per
/// pair. Returned as an `N × N` row-major table (upper triangle filled).
fn positive_product_counts(sample: &SampleMatrix, centers: &[f64]) -> Vec<u32> {
    let (dim, n) = (sample.n_vars(), sample.n_obs());
    let signs: Vec<Vec<i8>> = (0..dim)
        .map(|i| {
            sample
                .row(i)
                .iter()
                .map(|&x| match (x - centers[i]).partial_cmp(&0.0) {
                    Some(Ordering::Greater) => 1,
                    Some(Ordering::Less) => -1,
                    _ => 0,
                })
                .collect()
        })
        .collect();
    let mut counts = vec![0u32; dim * dim];
    for i in 0..dim {
        for j in (i + 1)..dim {
            let c = signs[i]
                .iter()
                .zip(&signs[j])
                .filter(|(a, b)| (**a as i32) * (**b as i32) > 0)
                .count();
            counts[i * dim + j] = c as u32;
        }
        debug_assert!(n <= u32::MAX as usize);
    }
    counts
}

fn fechner_centers(
    sample: &SampleMatrix,
    mode: MeanMode,
    mu: Option<&MeanVector>,
) -> Result<Vec<f64>> {
    match mode {
        MeanMode::KnownMean => {
            let mu = mu.ok_or(Error::MissingMean)?;
            if mu.dim() != sample.n_vars() {
                return Err(Error::DimensionMismatch {
                    expected: sample.n_vars(),
                    got: mu.dim(),
                });
            }
            Ok(mu.as_slice().to_vec())
        }
        MeanMode::SampleMean => Ok((0..sample.n_vars())
            .map(|i| sample.row(i).iter().sum::<f64>() / sample.n_obs() as f64)
            .collect()),
    }
}

/// Sample sign similarities: the fraction of observations with a strictly
/// positive centered product (a zero product scores 0).
pub fn sample_sign_similarity(
    sample: &SampleMatrix,
    mode: MeanMode,
    mu: Option<&MeanVector>,
) -> Result<SimilarityMatrix> {
    let centers = fechner_centers(sample, mode, mu)?;
    let counts = positive_product_counts(sample, &centers);
    let (dim, n) = (sample.n_vars(), sample.n_obs() as f64);
    Ok(SimilarityMatrix::from_fn(
        dim,
        NetworkKind::Fechner(mode),
        Provenance::Estimated,
        |i, j| f64::from(counts[i * dim + j]) / n,
    ))
}

/// Sample Fechner correlations `2·γ̂_sign − 1`.
pub fn sample_fechner(
    sample: &SampleMatrix,
    mode: MeanMode,
    mu: Option<&MeanVector>,
) -> Result<SimilarityMatrix> {
    let centers = fechner_centers(sample, mode, mu)?;
    let counts = positive_product_counts(sample, &centers);
    let dim = sample.n_vars();
    let n = sample.n_obs() as i64;
    Ok(SimilarityMatrix::from_fn(
        dim,
        NetworkKind::Fechner(mode),
        Provenance::Estimated,
        |i, j| (2 * i64::from(counts[i * dim + j]) - n) as f64 / n as f64,
    ))
}

/// Dispatches to the estimator for `kind`.
pub fn estimate(
    sample: &SampleMatrix,
    kind: NetworkKind,
    mu: Option<&MeanVector>,
) -> Result<SimilarityMatrix> {
    match kind {
        NetworkKind::Pearson => sample_pearson(sample),
        NetworkKind::Fechner(mode) => sample_fechner(sample, mode, mu),
        NetworkKind::Kendall => sample_kendall(sample),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(rows: Vec<Vec<f64>>) -> SampleMatrix {
        SampleMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn transform_values() {
        assert_eq!(pearson_to_sign(0.0).unwrap(), 0.5);
        assert_eq!(pearson_to_sign(1.0).unwrap(), 1.0);
        assert!((pearson_to_sign(0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(pearson_to_kendall(0.0).unwrap(), 0.0);
        assert!((pearson_to_kendall(0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(pearson_to_kendall(-1.0).unwrap(), -1.0);
        assert!(matches!(
            pearson_to_kendall(1.1),
            Err(Error::DomainError(_))
        ));
        assert!(matches!(
            pearson_to_sign(f64::NAN),
            Err(Error::DomainError(_))
        ));
        assert_eq!(pearson_to_kendall(1.0 + 1e-13).unwrap(), 1.0);
    }

    #[test]
    fn transform_consistency_on_grid() {
        for k in 0..=20_000 {
            let rho = -1.0 + k as f64 / 10_000.0;
            let lhs = 2.0 * pearson_to_sign(rho).unwrap() - 1.0;
            assert!(
                (lhs - pearson_to_kendall(rho).unwrap()).abs() <= 1e-14,
                "rho {rho}"
            );
        }
    }

    #[test]
    fn true_similarity_identity_is_zero() {
        let lam = CorrelationMatrix::identity(4).unwrap();
        for kind in [
            NetworkKind::Pearson,
            NetworkKind::Fechner(MeanMode::KnownMean),
            NetworkKind::Kendall,
        ] {
            let s = true_similarity(&lam, kind);
            assert_eq!(s.provenance(), Provenance::True);
            for i in 0..4 {
                for j in 0..4 {
                    assert_eq!(s.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn true_similarity_kendall_entry() {
        let lam = CorrelationMatrix::from_rows(&[vec![1.0, 0.9523], vec![0.9523, 1.0]]).unwrap();
        let s = true_similarity(&lam, NetworkKind::Kendall);
        assert!((s.get(0, 1) - 0.802_578).abs() < 1e-6, "{}", s.get(0, 1));
        assert_eq!(
            true_similarity(&lam, NetworkKind::Pearson).get(1, 0),
            0.9523
        );
    }

    #[test]
    fn pearson_examples() {
        let x: Vec<f64> = vec![1.0, 4.0, 2.0, 8.0, 5.0];
        let s = sample_pearson(&sample(vec![
            x.clone(),
            x.iter().map(|v| 2.0 * v + 3.0).collect(),
            x.iter().map(|v| -v).collect(),
        ]))
        .unwrap();
        assert!((s.get(0, 1) - 1.0).abs() < 1e-12);
        assert!((s.get(0, 2) + 1.0).abs() < 1e-12);
        let s = sample_pearson(&sample(vec![
            vec![1.0, 2.0, 3.0, 4.0],
            vec![2.0, 1.0, 4.0, 3.0],
        ]))
        .unwrap();
        assert!((s.get(0, 1) - 0.6).abs() < 1e-12);
        let err = sample_pearson(&sample(vec![vec![1.0, 2.0], vec![3.0, 3.0]])).unwrap_err();
        assert!(matches!(err, Error::ZeroVariance(1)));
    }

    #[test]
    fn fechner_examples() {
        let mu = MeanVector::zeros(2);
        let s = sample(vec![vec![1.0, -1.0, 1.0, -1.0], vec![1.0, 1.0, -1.0, -1.0]]);
        let sg = sample_sign_similarity(&s, MeanMode::KnownMean, Some(&mu)).unwrap();
        assert_eq!(sg.get(0, 1), 0.5);
        assert_eq!(
            sample_fechner(&s, MeanMode::KnownMean, Some(&mu))
                .unwrap()
                .get(0, 1),
            0.0
        );

        let x = vec![0.5, -2.0, 3.0];
        let s = sample(vec![x.clone(), x]);
        assert_eq!(
            sample_fechner(&s, MeanMode::KnownMean, Some(&mu))
                .unwrap()
                .get(0, 1),
            1.0
        );

        // zero product scores 0
        let s = sample(vec![vec![1.0, -1.0], vec![0.0, 5.0]]);
        assert_eq!(
            sample_sign_similarity(&s, MeanMode::KnownMean, Some(&mu))
                .unwrap()
                .get(0, 1),
            0.0
        );
        assert_eq!(
            sample_fechner(&s, MeanMode::KnownMean, Some(&mu))
                .unwrap()
                .get(0, 1),
            -1.0
        );

        assert!(matches!(
            sample_fechner(&s, MeanMode::KnownMean, None),
            Err(Error::MissingMean)
        ));
    }

    #[test]
    fn fechner_sample_mean_centering() {
        // means are 2 and 20; centered signs (-,-,+) and (-,+,+)
        let s = sample(vec![vec![1.0, 1.5, 3.5], vec![10.0, 21.0, 29.0]]);
        let sg = sample_sign_similarity(&s, MeanMode::SampleMean, None).unwrap();
        assert!((sg.get(0, 1) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn product_sign_avoids_underflow() {
        assert_eq!(product_sign(1e-200, 1e-200), Ordering::Greater);
        assert_eq!(product_sign(-1e-200, 1e-200), Ordering::Less);
        assert_eq!(product_sign(0.0, -3.0), Ordering::Equal);
        assert_eq!(product_sign(-0.0, -3.0), Ordering::Equal);
    }

    fn arb_sample() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..5, 3usize..25).prop_flat_map(|(dim, n)| {
            prop::collection::vec(
                prop::collection::vec((-20i32..20).prop_map(|v| f64::from(v) / 4.0), n),
                dim,
            )
        })
    }

    proptest! {
        #[test]
        fn estimators_are_permutation_invariant(rows in arb_sample(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let s = sample(rows);
            let mut perm: Vec<usize> = (0..s.n_obs()).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let p = s.permute_observations(&perm);
            let mu = MeanVector::zeros(s.n_vars());
            prop_assert_eq!(sample_kendall(&s).unwrap(), sample_kendall(&p).unwrap());
            prop_assert_eq!(
                sample_fechner(&s, MeanMode::KnownMean, Some(&mu)).unwrap(),
                sample_fechner(&p, MeanMode::KnownMean, Some(&mu)).unwrap()
            );
            if let (Ok(a), Ok(b)) = (sample_pearson(&s), sample_pearson(&p)) {
                for i in 0..s.n_vars() {
                    for j in 0..s.n_vars() {
                        prop_assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-12);
                    }
                }
            }
        }

        #[test]
        fn estimator_ranges(rows in arb_sample()) {
            let s = sample(rows);
            let n = s.n_obs() as f64;
            let sg = sample_sign_similarity(&s, MeanMode::SampleMean, None).unwrap();
            let kd = sample_kendall(&s).unwrap();
            for i in 0..s.n_vars() {
                for j in (i + 1)..s.n_vars() {
                    let v = sg.get(i, j);
                    prop_assert!((0.0..=1.0).contains(&v));
                    prop_assert!(((v * n).round() - v * n).abs() < 1e-9);
                    prop_assert!((-1.0..=1.0).contains(&kd.get(i, j)));
                }
            }
            if let Ok(p) = sample_pearson(&s) {
                for i in 0..s.n_vars() {
                    for j in 0..s.n_vars() {
                        prop_assert!(p.get(i, j).abs() <= 1.0 + 1e-12);
                    }
                }
            }
        }
    }
}
