//! Confusion counts between a true and an identified spanning tree, and the
//! error rates derived from them.
//!
//! Both trees have `N − 1` edges, so every falsely included edge displaces a
//! true one (`FP == FN`), and each rate is an affine function of `FP`.
//! Aggregation therefore keeps integer sums of `FP`, which makes it exact and
//! independent of the order in which replications are merged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mst::SpanningTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub n_nodes: usize,
    pub m_edges: usize,
}

impl ConfusionCounts {
    /// Counts for a tree with `fp` false inclusions on `n_nodes` nodes.
    pub fn from_false_positives(n_nodes: usize, fp: usize) -> Result<Self> {
        if n_nodes < 2 {
            return Err(Error::TooSmall(n_nodes));
        }
        let tree = n_nodes - 1;
        if fp > tree {
            return Err(Error::InvalidTree(format!(
                "{fp} false positives exceed {tree} edges"
            )));
        }
        let m_edges = n_nodes * (n_nodes - 1) / 2;
        // each false inclusion displaces a true edge, so fp is also bounded by
        // the number of non-tree pairs (binding only at N = 3)
        if fp > m_edges - tree {
            return Err(Error::InvalidTree(format!(
                "{fp} false positives exceed the {} non-tree pairs",
                m_edges - tree
            )));
        }
        Ok(Self {
            tp: tree - fp,
            fp,
            fn_: fp,
            tn: m_edges - tree - fp,
            n_nodes,
            m_edges,
        })
    }
}

pub fn confusion(true_tree: &SpanningTree, est_tree: &SpanningTree) -> Result<ConfusionCounts> {
    let n = true_tree.n_nodes();
    if est_tree.n_nodes() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: est_tree.n_nodes(),
        });
    }
    // both edge lists are sorted
    let (a, b) = (true_tree.edges(), est_tree.edges());
    let (mut i, mut j, mut tp) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                tp += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let fp = b.len() - tp;
    let fn_ = a.len() - tp;
    // Unreachable for valid trees: equal edge counts force FP == FN.
    assert_eq!(fp, fn_, "spanning trees must have equal edge counts");
    ConfusionCounts::from_false_positives(n, fp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub fdr: f64,
    /// No false inclusion (the complement is the per-replication FWER indicator).
    pub exact_match: bool,
    pub pfer: f64,
    pub pcer: f64,
    pub tpr: f64,
    pub acc: f64,
    pub fpr: f64,
    pub false_positives: usize,
    pub n_nodes: usize,
}

pub fn error_rates(c: &ConfusionCounts) -> ErrorRates {
    let tree = c.fp + c.tp;
    debug_assert_eq!(tree, c.n_nodes - 1);
    let fp = c.fp as f64;
    let m = c.m_edges as f64;
    let negatives = c.m_edges - tree;
    let fdr = fp / tree as f64;
    ErrorRates {
        fdr,
        exact_match: c.fp == 0,
        pfer: fp,
        pcer: fp / m,
        tpr: 1.0 - fdr,
        acc: (c.tp + c.tn) as f64 / m,
        // N = 2 has a single possible edge and no negatives.
        fpr: if negatives == 0 {
            0.0
        } else {
            fp / negatives as f64
        },
        false_positives: c.fp,
        n_nodes: c.n_nodes,
    }
}

/// Monte Carlo estimate of the expected error rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub replications: u64,
    pub mean_fdr: f64,
    /// Standard error of `mean_fdr` (sample standard deviation over `√S`).
    pub std_error: f64,
    /// Fraction of replications with at least one false inclusion.
    pub fwer: f64,
    pub mean_pfer: f64,
    pub mean_pcer: f64,
    pub mean_tpr: f64,
    pub mean_acc: f64,
    pub mean_fpr: f64,
}

/// Associative accumulator over replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub n_nodes: usize,
    pub replications: u64,
    pub sum_fp: u64,
    pub sum_fp_sq: u64,
    pub with_errors: u64,
}

impl Tally {
    pub fn new(n_nodes: usize) -> Self {
        Self {
            n_nodes,
            ..Self::default()
        }
    }

    pub fn push(&mut self, false_positives: usize) {
        let fp = false_positives as u64;
        self.replications += 1;
        self.sum_fp += fp;
        self.sum_fp_sq += fp * fp;
        self.with_errors += u64::from(fp > 0);
    }

    pub fn merge(&mut self, other: &Tally) -> Result<()> {
        if self.n_nodes != other.n_nodes {
            return Err(Error::DimensionMismatch {
                expected: self.n_nodes,
                got: other.n_nodes,
            });
        }
        self.replications += other.replications;
        self.sum_fp += other.sum_fp;
        self.sum_fp_sq += other.sum_fp_sq;
        self.with_errors += other.with_errors;
        Ok(())
    }

    pub fn report(&self) -> Result<AggregateReport> {
        if self.replications == 0 {
            return Err(Error::EmptyInput);
        }
        let n = self.n_nodes;
        let s = self.replications as f64;
        let tree = (n - 1) as f64;
        let m = (n * (n - 1) / 2) as f64;
        let negatives = m - tree;
        let mean_fp = self.sum_fp as f64 / s;
        let mean_fdr = mean_fp / tree;
        let std_error = if self.replications < 2 {
            0.0
        } else {
            // S·Σfp² − (Σfp)² is exact in integers.
            let r = u128::from(self.replications);
            let num =
                r * u128::from(self.sum_fp_sq) - u128::from(self.sum_fp) * u128::from(self.sum_fp);
            let var_fp = num as f64 / (s * (s - 1.0));
            var_fp.sqrt() / tree / s.sqrt()
        };
        Ok(AggregateReport {
            replications: self.replications,
            mean_fdr,
            std_error,
            fwer: self.with_errors as f64 / s,
            mean_pfer: mean_fp,
            mean_pcer: mean_fp / m,
            mean_tpr: 1.0 - mean_fdr,
            mean_acc: (m - 2.0 * mean_fp) / m,
            mean_fpr: if negatives == 0.0 {
                0.0
            } else {
                mean_fp / negatives
            },
        })
    }
}

/// Averages per-replication rates; all rates must share one `N`.
pub fn aggregate(rates: &[ErrorRates]) -> Result<AggregateReport> {
    let first = rates.first().ok_or(Error::EmptyInput)?;
    let mut tally = Tally::new(first.n_nodes);
    for r in rates {
        if r.n_nodes != first.n_nodes {
            return Err(Error::DimensionMismatch {
                expected: first.n_nodes,
                got: r.n_nodes,
            });
        }
        tally.push(r.false_positives);
    }
    tally.report()
}
