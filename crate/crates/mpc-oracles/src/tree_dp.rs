//! Textbook tree DPs, `O(n)` for the local problems and `O(n^2)` knapsack
//! for bisection and k-subtree.

use crate::{OracleError, Rooted};

pub fn max_weight_matching(t: &Rooted) -> i64 {
    let n = t.len();
    // free[v]: v not matched below; used[v]: v matched to a child.
    let mut free = vec![0i64; n];
    let mut used = vec![i64::MIN; n];
    for v in t.postorder() {
        let base: i64 = t.children[v].iter().map(|&c| free[c].max(used[c])).sum();
        free[v] = base;
        for &c in &t.children[v] {
            let alt = base - free[c].max(used[c]) + free[c] + t.weight[c];
            used[v] = used[v].max(alt);
        }
    }
    free[t.root].max(used[t.root])
}

pub fn max_independent_set(t: &Rooted) -> i64 {
    let n = t.len();
    let (mut inc, mut exc) = (vec![0i64; n], vec![0i64; n]);
    for v in t.postorder() {
        inc[v] = 1 + t.children[v].iter().map(|&c| exc[c]).sum::<i64>();
        exc[v] = t.children[v].iter().map(|&c| inc[c].max(exc[c])).sum();
    }
    inc[t.root].max(exc[t.root])
}

pub fn min_vertex_cover(t: &Rooted) -> i64 {
    let n = t.len();
    let (mut inc, mut exc) = (vec![0i64; n], vec![0i64; n]);
    for v in t.postorder() {
        inc[v] = 1 + t.children[v].iter().map(|&c| inc[c].min(exc[c])).sum::<i64>();
        exc[v] = t.children[v].iter().map(|&c| inc[c]).sum();
    }
    inc[t.root].min(exc[t.root])
}

/// Heaviest simple path (0 for a single vertex).
pub fn longest_path(t: &Rooted) -> i64 {
    let mut down = vec![0i64; t.len()];
    let mut best = 0;
    for v in t.postorder() {
        let (mut a, mut b) = (0, 0);
        for &c in &t.children[v] {
            let x = down[c] + t.weight[c];
            if x > a {
                b = a;
                a = x;
            } else if x > b {
                b = x;
            }
        }
        down[v] = a;
        best = best.max(a + b);
    }
    best
}

pub fn min_dominating_set(t: &Rooted) -> i64 {
    const BIG: i64 = i64::MAX / 4;
    let n = t.len();
    // taken: v in the set; covered: v out, some child in; open: v out, no child in.
    let (mut taken, mut covered, mut open) = (vec![0i64; n], vec![0i64; n], vec![0i64; n]);
    for v in t.postorder() {
        let kids = &t.children[v];
        let sum = |f: &dyn Fn(usize) -> i64| kids.iter().fold(0i64, |acc, &c| (acc + f(c)).min(BIG));
        taken[v] = 1 + sum(&|c| taken[c].min(covered[c]).min(open[c]));
        open[v] = sum(&|c| covered[c]);
        let base = sum(&|c| taken[c].min(covered[c]));
        let extra = kids.iter().map(|&c| taken[c] - taken[c].min(covered[c])).min();
        covered[v] = extra.map_or(BIG, |e| (base + e).min(BIG));
    }
    taken[t.root].min(covered[t.root])
}

/// Least total weight of edges cut by a set of exactly `floor(n/2)` vertices.
pub fn min_bisection(t: &Rooted) -> i64 {
    const INF: i64 = i64::MAX / 4;
    let n = t.len();
    // dp[v][side][j]: v on `side`, j vertices of side 1 in v's subtree.
    let mut dp: Vec<[Vec<i64>; 2]> = vec![[vec![], vec![]]; n];
    for v in t.postorder() {
        let mut cur = [vec![0, INF], vec![INF, 0]];
        for &c in &t.children[v] {
            let kid = std::mem::take(&mut dp[c]);
            let mut next = [vec![INF; cur[0].len() + kid[0].len() - 1], vec![INF; cur[0].len() + kid[0].len() - 1]];
            for s in 0..2 {
                for (i, &a) in cur[s].iter().enumerate() {
                    if a >= INF {
                        continue;
                    }
                    for cs in 0..2 {
                        let cut = if s == cs { 0 } else { t.weight[c] };
                        for (j, &b) in kid[cs].iter().enumerate() {
                            if b < INF {
                                next[s][i + j] = next[s][i + j].min(a + b + cut);
                            }
                        }
                    }
                }
            }
            cur = next;
        }
        dp[v] = cur;
    }
    let r = &dp[t.root];
    r[0][n / 2].min(r[1][n / 2])
}

/// Heaviest connected subtree with exactly `k` vertices.
pub fn max_k_subtree(t: &Rooted, k: usize) -> Result<i64, OracleError> {
    let n = t.len();
    if k > n {
        return Err(OracleError::InfeasibleK { k, n });
    }
    if k == 0 {
        return Ok(0);
    }
    const NONE: i64 = i64::MIN / 4;
    // dp[v][j]: best subtree topped at v with j vertices.
    let mut dp: Vec<Vec<i64>> = vec![vec![]; n];
    let mut best = NONE;
    for v in t.postorder() {
        let mut cur = vec![NONE, 0];
        for &c in &t.children[v] {
            let kid = std::mem::take(&mut dp[c]);
            let mut next = vec![NONE; cur.len() + kid.len() - 1];
            next[..cur.len()].copy_from_slice(&cur);
            for (i, &a) in cur.iter().enumerate().skip(1) {
                for (j, &b) in kid.iter().enumerate().skip(1) {
                    if a > NONE && b > NONE {
                        next[i + j] = next[i + j].max(a + b + t.weight[c]);
                    }
                }
            }
            cur = next;
        }
        if let Some(&x) = cur.get(k) {
            best = best.max(x);
        }
        dp[v] = cur;
    }
    Ok(best)
}
