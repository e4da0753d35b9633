//! Kendall estimator over ordered observation pairs, where a pair counts
//! `+1` when the product of coordinate differences is `>= 0` (ties are
//! concordant) and `-1` otherwise.
//!
//! Summing over ordered pairs doubles the unordered count, so with `D` the
//! number of unordered pairs whose differences have strictly opposite signs,
//! the statistic is `(n(n-1) - 4D) / (n(n-1))`. The fast path finds `D` by
//! sorting the observations by `(x_i, x_j)` and counting strict inversions of
//! the `x_j` ranks with a merge sort: pairs tied in `x_i` are ascending in
//! `x_j` and contribute nothing, pairs tied in `x_j` are not strict
//! inversions, so ties land on the concordant side exactly as required.

use std::cmp::Ordering;

use super::{product_sign, NetworkKind, Provenance, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::sampling::SampleMatrix;

/// Default cap on `n` for the quadratic reference implementation.
pub const NAIVE_KENDALL_GUARD: usize = 5000;

const INSERTION_BLOCK: usize = 16;

/// Dense ranks (ties share a rank) and the ascending order of one series.
struct Ranked {
    ranks: Vec<u32>,
    order: Vec<u32>,
}

fn rank(x: &[f64]) -> Ranked {
    let mut order: Vec<u32> = (0..x.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| x[a as usize].total_cmp(&x[b as usize]));
    let mut ranks = vec![0u32; x.len()];
    let mut r = 0u32;
    for k in 0..order.len() {
        // `==` merges -0.0 and 0.0, which total_cmp keeps adjacent.
        if k > 0 && x[order[k] as usize] != x[order[k - 1] as usize] {
            r += 1;
        }
        ranks[order[k] as usize] = r;
    }
    Ranked { ranks, order }
}

/// Counts pairs `a < b` with `seq[a] > seq[b]`, sorting `seq` in place.
fn count_inversions(seq: &mut Vec<u32>, buf: &mut Vec<u32>) -> u64 {
    let n = seq.len();
    let mut inversions = 0u64;

    for block in seq.chunks_mut(INSERTION_BLOCK) {
        for k in 1..block.len() {
            let v = block[k];
            let mut p = k;
            while p > 0 && block[p - 1] > v {
                block[p] = block[p - 1];
                p -= 1;
            }
            block[p] = v;
            inversions += (k - p) as u64;
        }
    }

    buf.clear();
    buf.resize(n, 0);
    let mut width = INSERTION_BLOCK;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            let (mut i, mut j, mut k) = (lo, mid, lo);
            while i < mid && j < hi {
                if seq[j] < seq[i] {
                    buf[k] = seq[j];
                    j += 1;
                    inversions += (mid - i) as u64;
                } else {
                    buf[k] = seq[i];
                    i += 1;
                }
                k += 1;
            }
            buf[k..k + (mid - i)].copy_from_slice(&seq[i..mid]);
            k += mid - i;
            buf[k..k + (hi - j)].copy_from_slice(&seq[j..hi]);
            lo = hi;
        }
        std::mem::swap(seq, buf);
        width *= 2;
    }
    inversions
}

/// Strictly discordant unordered pairs between two ranked series.
fn discordant_pairs(x: &Ranked, y: &Ranked, seq: &mut Vec<u32>, buf: &mut Vec<u32>) -> u64 {
    seq.clear();
    seq.extend(x.order.iter().map(|&t| y.ranks[t as usize]));
    // Within a run of equal x, order by y so the run contributes no inversion.
    let mut start = 0;
    let n = seq.len();
    while start < n {
        let rx = x.ranks[x.order[start] as usize];
        let mut end = start + 1;
        while end < n && x.ranks[x.order[end] as usize] == rx {
            end += 1;
        }
        if end - start > 1 {
            seq[start..end].sort_unstable();
        }
        start = end;
    }
    count_inversions(seq, buf)
}

fn statistic(n: usize, signed_sum: i64) -> f64 {
    let ordered_pairs = (n * (n - 1)) as i64;
    signed_sum as f64 / ordered_pairs as f64
}

/// Kendall correlation matrix in `O(N² · n log n)`.
pub fn sample_kendall(sample: &SampleMatrix) -> Result<SimilarityMatrix> {
    let (dim, n) = (sample.n_vars(), sample.n_obs());
    if n < 2 {
        return Err(Error::TooFewRows(n));
    }
    let ranked: Vec<Ranked> = (0..dim).map(|i| rank(sample.row(i))).collect();
    let mut seq = Vec::with_capacity(n);
    let mut buf = Vec::with_capacity(n);
    let ordered_pairs = (n * (n - 1)) as i64;
    Ok(SimilarityMatrix::from_fn(
        dim,
        NetworkKind::Kendall,
        Provenance::Estimated,
        |i, j| {
            let d = discordant_pairs(&ranked[i], &ranked[j], &mut seq, &mut buf) as i64;
            statistic(n, ordered_pairs - 4 * d)
        },
    ))
}

/// Literal double sum over ordered pairs `t != s`; reference implementation
/// for tests, capped at [`NAIVE_KENDALL_GUARD`] observations.
pub fn sample_kendall_naive(sample: &SampleMatrix) -> Result<SimilarityMatrix> {
    sample_kendall_naive_with_guard(sample, NAIVE_KENDALL_GUARD)
}

pub fn sample_kendall_naive_with_guard(
    sample: &SampleMatrix,
    guard: usize,
) -> Result<SimilarityMatrix> {
    let (dim, n) = (sample.n_vars(), sample.n_obs());
    if n > guard {
        return Err(Error::GuardExceeded {
            what: "naive Kendall observations",
            got: n,
            limit: guard,
        });
    }
    if n < 2 {
        return Err(Error::TooFewRows(n));
    }
    Ok(SimilarityMatrix::from_fn(
        dim,
        NetworkKind::Kendall,
        Provenance::Estimated,
        |i, j| {
            let (x, y) = (sample.row(i), sample.row(j));
            let mut sum = 0i64;
            for t in 0..n {
                for s in 0..n {
                    if s == t {
                        continue;
                    }
                    sum += match product_sign(x[t] - x[s], y[t] - y[s]) {
                        Ordering::Less => -1,
                        _ => 1,
                    };
                }
            }
            statistic(n, sum)
        },
    ))
}
