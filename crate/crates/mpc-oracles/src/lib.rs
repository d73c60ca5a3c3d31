//! Reference solvers used as ground truth.
//!
//! Everything here is single-machine and written independently of the
//! cluster solvers: textbook tree DPs, quadratic knapsack DPs, exhaustive
//! search for small inputs, Kruskal and quadratic scans for geometry. Only
//! the input types are shared with `mpc-treedp`.

use std::time::{Duration, Instant};

use mpc_treedp::tree::{Tree, TreeError};
use thiserror::Error;

pub mod brute;
pub mod geo;
pub mod kmedian;
pub mod tree_dp;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{n} vertices is too many for exhaustive search (limit {limit})")]
    TooLarge { n: usize, limit: usize },
    #[error("k = {k} is infeasible for {n} vertices")]
    InfeasibleK { k: usize, n: usize },
    #[error("unknown problem {0:?}")]
    UnknownProblem(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// A tree as parent/children arrays with integer edge weights.
#[derive(Clone, Debug)]
pub struct Rooted {
    pub root: usize,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// Weight of the edge to the parent (0 at the root).
    pub weight: Vec<i64>,
    /// Parents before children.
    pub preorder: Vec<usize>,
}

impl Rooted {
    pub fn new(tree: &Tree) -> Result<Self, OracleError> {
        let n = tree.len();
        let (weight, _) = tree.scaled_weights()?;
        let parent: Vec<Option<usize>> = (0..n).map(|v| tree.parent(v)).collect();
        let mut children = vec![Vec::new(); n];
        let mut root = 0;
        for v in 0..n {
            match parent[v] {
                Some(p) => children[p].push(v),
                None => root = v,
            }
        }
        let mut preorder = Vec::with_capacity(n);
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            preorder.push(v);
            stack.extend(children[v].iter().copied());
        }
        Ok(Rooted { root, parent, children, weight, preorder })
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Children before parents.
    pub fn postorder(&self) -> impl Iterator<Item = usize> + '_ {
        self.preorder.iter().rev().copied()
    }

    /// Weighted distances from `s`.
    pub fn distances(&self, s: usize) -> Vec<i64> {
        let mut d = vec![-1; self.len()];
        d[s] = 0;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            let up = self.parent[u].map(|p| (p, self.weight[u]));
            let downs = self.children[u].iter().map(|&c| (c, self.weight[c]));
            for (v, w) in up.into_iter().chain(downs) {
                if d[v] < 0 {
                    d[v] = d[u] + w;
                    stack.push(v);
                }
            }
        }
        d
    }
}

/// One oracle answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleResult {
    pub problem: String,
    /// FNV-1a of the tree's text form.
    pub digest: u64,
    pub value: i64,
    pub elapsed: Duration,
}

pub fn digest(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Solve a tree problem by name with the polynomial oracles. `k` is used by
/// `kst`, `kmedian` and `kcenter`.
pub fn solve(problem: &str, tree: &Tree, k: usize) -> Result<OracleResult, OracleError> {
    let start = Instant::now();
    let t = Rooted::new(tree)?;
    let value = match problem {
        "matching" => tree_dp::max_weight_matching(&t),
        "mis" => tree_dp::max_independent_set(&t),
        "vc" => tree_dp::min_vertex_cover(&t),
        "longest-path" => tree_dp::longest_path(&t),
        "dominating-set" => tree_dp::min_dominating_set(&t),
        "bisection" => tree_dp::min_bisection(&t),
        "kst" => tree_dp::max_k_subtree(&t, k)?,
        "kmedian" => kmedian::solve(&t, k, kmedian::Cost::Sum)?,
        "kcenter" => kmedian::solve(&t, k, kmedian::Cost::Max)?,
        other => return Err(OracleError::UnknownProblem(other.to_string())),
    };
    Ok(OracleResult { problem: problem.to_string(), digest: digest(&tree.emit()), value, elapsed: start.elapsed() })
}
