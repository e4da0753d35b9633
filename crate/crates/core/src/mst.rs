//! Maximum spanning trees over similarity matrices.
//!
//! Node indices are 0-based in memory and 1-based in the textual edge-list
//! format.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::SimilarityMatrix;

/// Largest `N` accepted by [`brute_force_mst`] (`9^7` Prüfer sequences).
pub const BRUTE_FORCE_MAX_NODES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Unweighted spanning tree; edges are stored as sorted `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "TreeRepr", into = "TreeRepr")]
pub struct SpanningTree {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl SpanningTree {
    /// Checks that `edges` form a spanning tree on `n_nodes` nodes.
    pub fn from_edges(n_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n_nodes < 2 {
            return Err(Error::TooSmall(n_nodes));
        }
        if edges.len() != n_nodes - 1 {
            return Err(Error::InvalidTree(format!(
                "{} edges for {} nodes",
                edges.len(),
                n_nodes
            )));
        }
        let mut uf = UnionFind::new(n_nodes);
        let mut norm = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b || a >= n_nodes || b >= n_nodes {
                return Err(Error::InvalidTree(format!("bad edge ({a}, {b})")));
            }
            if !uf.union(a, b) {
                return Err(Error::InvalidTree(format!(
                    "edge ({a}, {b}) closes a cycle"
                )));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        Ok(Self {
            n_nodes,
            edges: norm,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges.binary_search(&(i.min(j), i.max(j))).is_ok()
    }

    pub fn total_weight(&self, sim: &SimilarityMatrix) -> f64 {
        self.edges.iter().map(|&(i, j)| sim.get(i, j)).sum()
    }

    /// One `i,j` line per edge, 1-based, lexicographic.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "{},{}", i + 1, j + 1);
        }
        out
    }

    /// Parses the format written by [`SpanningTree::to_edge_list`].
    pub fn parse_edge_list(n_nodes: usize, text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (row, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',');
            let mut field = |col: usize| -> Result<usize> {
                let raw = parts.next().ok_or(Error::ParseError {
                    row: row + 1,
                    col,
                    msg: "missing field".into(),
                })?;
                let v = usize::from_str(raw.trim()).map_err(|e| Error::ParseError {
                    row: row + 1,
                    col,
                    msg: e.to_string(),
                })?;
                v.checked_sub(1).ok_or(Error::ParseError {
                    row: row + 1,
                    col,
                    msg: "node indices are 1-based".into(),
                })
            };
            let (i, j) = (field(1)?, field(2)?);
            edges.push((i, j));
        }
        Self::from_edges(n_nodes, edges)
    }
}

#[derive(Serialize, Deserialize)]
struct TreeRepr {
    n_nodes: usize,
    /// 1-based pairs.
    edges: Vec<(usize, usize)>,
}

impl From<SpanningTree> for TreeRepr {
    fn from(t: SpanningTree) -> Self {
        TreeRepr {
            n_nodes: t.n_nodes,
            edges: t.edges.iter().map(|&(i, j)| (i + 1, j + 1)).collect(),
        }
    }
}

impl TryFrom<TreeRepr> for SpanningTree {
    type Error = Error;

    fn try_from(r: TreeRepr) -> Result<Self> {
        let edges = r
            .edges
            .iter()
            .map(|&(i, j)| match (i.checked_sub(1), j.checked_sub(1)) {
                (Some(a), Some(b)) => Ok((a, b)),
                _ => Err(Error::InvalidTree("node indices are 1-based".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        SpanningTree::from_edges(r.n_nodes, edges)
    }
}

/// Order applied among equal-weight edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieRule {
    /// `(i, j)` ascending after the weight-descending sort.
    Lexicographic,
    /// `(i, j)` descending: the order met when walking an ascending sort backwards.
    ReverseLexicographic,
    /// Seeded shuffle inside every tie group.
    Random(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TieGroup {
    pub weight: f64,
    pub edges: Vec<(usize, usize)>,
}

/// Equal-weight groups met while building the tree.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TieReport {
    pub groups: Vec<TieGroup>,
    /// Some group contained an edge that joined two components when the group
    /// was reached yet was rejected, so another tie order could pick it.
    pub affects_result: bool,
    /// Weight of the first such group.
    pub ambiguous_weight: Option<f64>,
}

/// Kruskal maximum spanning tree with the lexicographic tie rule.
pub fn kruskal_mst(sim: &SimilarityMatrix) -> Result<(SpanningTree, TieReport)> {
    kruskal_mst_with(sim, TieRule::Lexicographic)
}

pub fn kruskal_mst_with(
    sim: &SimilarityMatrix,
    rule: TieRule,
) -> Result<(SpanningTree, TieReport)> {
    let n = sim.dim();
    if n < 2 {
        return Err(Error::TooSmall(n));
    }
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let w = sim.get(i, j);
            if !w.is_finite() {
                return Err(Error::NonFiniteWeight { i, j });
            }
            // + 0.0 folds -0.0 into 0.0 so equal weights sort adjacently
            edges.push(Edge {
                i,
                j,
                weight: w + 0.0,
            });
        }
    }
    edges.sort_unstable_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
    let mut rng = match rule {
        TieRule::Lexicographic | TieRule::ReverseLexicographic => None,
        TieRule::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
    };

    let mut uf = UnionFind::new(n);
    let mut tree = Vec::with_capacity(n - 1);
    let mut report = TieReport::default();
    let mut crossing = Vec::new();
    let mut k = 0;
    while k < edges.len() && tree.len() < n - 1 {
        let mut g = k + 1;
        while g < edges.len() && edges[g].weight == edges[k].weight {
            g += 1;
        }
        let group = &mut edges[k..g];
        if group.len() == 1 {
            let e = group[0];
            if uf.union(e.i, e.j) {
                tree.push((e.i, e.j));
            }
        } else {
            if let Some(rng) = rng.as_mut() {
                group.shuffle(rng);
            } else if rule == TieRule::ReverseLexicographic {
                group.reverse();
            }
            crossing.clear();
            crossing.extend(group.iter().map(|e| uf.find(e.i) != uf.find(e.j)));
            let mut ambiguous = false;
            for (e, &was_crossing) in group.iter().zip(&crossing) {
                let accepted = tree.len() < n - 1 && uf.union(e.i, e.j);
                if accepted {
                    tree.push((e.i, e.j));
                } else if was_crossing {
                    ambiguous = true;
                }
            }
            if ambiguous && !report.affects_result {
                report.affects_result = true;
                report.ambiguous_weight = Some(group[0].weight);
            }
            report.groups.push(TieGroup {
                weight: group[0].weight,
                edges: group.iter().map(|e| (e.i, e.j)).collect(),
            });
        }
        k = g;
    }
    let tree = SpanningTree::from_edges(n, tree)?;
    Ok((tree, report))
}

/// Exhaustive maximum spanning tree over all Prüfer sequences. Test oracle;
/// limited to [`BRUTE_FORCE_MAX_NODES`] nodes.
pub fn brute_force_mst(sim: &SimilarityMatrix) -> Result<SpanningTree> {
    let n = sim.dim();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(Error::GuardExceeded {
            what: "brute-force MST nodes",
            got: n,
            limit: BRUTE_FORCE_MAX_NODES,
        });
    }
    if n < 2 {
        return Err(Error::TooSmall(n));
    }
    if n == 2 {
        return SpanningTree::from_edges(2, vec![(0, 1)]);
    }
    let mut seq = vec![0usize; n - 2];
    let mut edges = Vec::with_capacity(n - 1);
    let mut degree = vec![0usize; n];
    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
    loop {
        decode_prufer(&seq, n, &mut degree, &mut edges);
        let w: f64 = edges.iter().map(|&(a, b)| sim.get(a, b)).sum();
        if best.as_ref().is_none_or(|(bw, _)| w > *bw) {
            best = Some((w, edges.clone()));
        }
        // odometer increment
        let mut pos = 0;
        while pos < seq.len() {
            seq[pos] += 1;
            if seq[pos] < n {
                break;
            }
            seq[pos] = 0;
            pos += 1;
        }
        if pos == seq.len() {
            break;
        }
    }
    let (_, edges) = best.expect("at least one tree");
    SpanningTree::from_edges(n, edges)
}

fn decode_prufer(seq: &[usize], n: usize, degree: &mut [usize], edges: &mut Vec<(usize, usize)>) {
    edges.clear();
    degree.fill(1);
    for &x in seq {
        degree[x] += 1;
    }
    for &x in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf exists");
        edges.push((leaf, x));
        degree[leaf] -= 1;
        degree[x] -= 1;
    }
    let mut rest = (0..n).filter(|&v| degree[v] == 1);
    let (u, v) = (rest.next().unwrap(), rest.next().unwrap());
    edges.push((u, v));
}

/// Whether two trees on the same node set have identical edge sets.
pub fn tree_equal(a: &SpanningTree, b: &SpanningTree) -> Result<bool> {
    if a.n_nodes != b.n_nodes {
        return Err(Error::DimensionMismatch {
            expected: a.n_nodes,
            got: b.n_nodes,
        });
    }
    Ok(a.edges == b.edges)
}

/// Disjoint sets with path compression and union by rank.
struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Returns false when `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}
