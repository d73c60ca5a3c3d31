//! k-median and k-center by enumerating center sets.

use crate::{OracleError, Rooted};

pub const LIMIT: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cost {
    /// Sum of distances to the nearest center.
    Sum,
    /// Largest distance to the nearest center.
    Max,
}

/// Exhaustive search up to [`EXHAUSTIVE_UP_TO`] vertices, the assignment DP
/// beyond.
pub fn solve(t: &Rooted, k: usize, cost: Cost) -> Result<i64, OracleError> {
    if t.len() <= EXHAUSTIVE_UP_TO {
        exhaustive(t, k, cost)
    } else {
        assignment_dp(t, k, cost)
    }
}

pub const EXHAUSTIVE_UP_TO: usize = 12;

/// Best cost over all sets of at most `k` centers.
pub fn exhaustive(t: &Rooted, k: usize, cost: Cost) -> Result<i64, OracleError> {
    let n = t.len();
    if n > LIMIT {
        return Err(OracleError::TooLarge { n, limit: LIMIT });
    }
    if k == 0 {
        return Err(OracleError::InfeasibleK { k, n });
    }
    let dist: Vec<Vec<i64>> = (0..n).map(|s| t.distances(s)).collect();
    let mut best = i64::MAX;
    for set in 1u32..1 << n {
        if set.count_ones() as usize > k {
            continue;
        }
        let near = (0..n).map(|v| (0..n).filter(|&c| set >> c & 1 == 1).map(|c| dist[c][v]).min().expect("non-empty"));
        let c = match cost {
            Cost::Sum => near.sum(),
            Cost::Max => near.max().unwrap_or(0),
        };
        best = best.min(c);
    }
    Ok(best)
}

/// Center-assignment DP, `O(n^2 k^2)`: `F(v, c, j)` is the best cost of the
/// subtree of `v` with exactly `j` centers inside it when `v` is served by
/// `c`. A child of `v` is served either by `v`'s center or from inside its
/// own subtree, since nearest-center cells on a tree are connected.
pub fn assignment_dp(t: &Rooted, k: usize, cost: Cost) -> Result<i64, OracleError> {
    let n = t.len();
    if k == 0 {
        return Err(OracleError::InfeasibleK { k, n });
    }
    const INF: i64 = i64::MAX / 4;
    let join = |a: i64, b: i64| match cost {
        Cost::Sum => (a + b).min(INF),
        Cost::Max => a.max(b),
    };
    let dist: Vec<Vec<i64>> = (0..n).map(|s| t.distances(s)).collect();
    let (mut tin, mut tout) = (vec![0; n], vec![0; n]);
    let mut clock = 0;
    let mut stack = vec![(t.root, false)];
    while let Some((v, done)) = stack.pop() {
        if done {
            tout[v] = clock;
            continue;
        }
        tin[v] = clock;
        clock += 1;
        stack.push((v, true));
        stack.extend(t.children[v].iter().map(|&c| (c, false)));
    }
    let inside = |c: usize, v: usize| tin[v] <= tin[c] && tin[c] < tout[v];
    let kk = k.min(n);
    // f[v][c][j]; best[v][j] = min over c inside v.
    let mut f: Vec<Vec<Vec<i64>>> = vec![vec![]; n];
    let mut best: Vec<Vec<i64>> = vec![vec![]; n];
    for v in t.postorder() {
        let mut fv = vec![vec![INF; kk + 1]; n];
        for (c, slot) in fv.iter_mut().enumerate() {
            let mut cur = vec![INF; kk + 1];
            if c == v {
                if kk >= 1 {
                    cur[1] = 0;
                }
            } else {
                cur[0] = dist[v][c];
            }
            for &u in &t.children[v] {
                let opt: Vec<i64> = if inside(c, u) {
                    f[u][c].clone()
                } else {
                    (0..=kk).map(|j| f[u][c][j].min(best[u][j])).collect()
                };
                let mut next = vec![INF; kk + 1];
                for a in 0..=kk {
                    if cur[a] >= INF {
                        continue;
                    }
                    for b in 0..=kk - a {
                        if opt[b] < INF {
                            next[a + b] = next[a + b].min(join(cur[a], opt[b]));
                        }
                    }
                }
                cur = next;
            }
            *slot = cur;
        }
        best[v] = (0..=kk).map(|j| (0..n).filter(|&c| inside(c, v)).map(|c| fv[c][j]).min().unwrap_or(INF)).collect();
        for &u in &t.children[v] {
            f[u] = vec![];
        }
        f[v] = fv;
    }
    Ok(best[t.root][1..].iter().copied().min().expect("k >= 1"))
}
