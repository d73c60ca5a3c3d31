//! Exhaustive search over subsets, for trees of at most [`LIMIT`] vertices.

use crate::{OracleError, Rooted};

pub const LIMIT: usize = 16;

fn check(t: &Rooted) -> Result<usize, OracleError> {
    match t.len() {
        n if n > LIMIT => Err(OracleError::TooLarge { n, limit: LIMIT }),
        n => Ok(n),
    }
}

/// Edges as (child, parent, weight).
fn edges(t: &Rooted) -> Vec<(usize, usize, i64)> {
    (0..t.len()).filter_map(|v| t.parent[v].map(|p| (v, p, t.weight[v]))).collect()
}

fn has(mask: u32, v: usize) -> bool {
    mask >> v & 1 == 1
}

pub fn max_weight_matching(t: &Rooted) -> Result<i64, OracleError> {
    check(t)?;
    let es = edges(t);
    let mut best = 0;
    for sel in 0u32..1 << es.len() {
        let mut used = 0u32;
        let mut total = 0;
        let mut ok = true;
        for (i, &(a, b, w)) in es.iter().enumerate() {
            if has(sel, i) {
                if has(used, a) || has(used, b) {
                    ok = false;
                    break;
                }
                used |= 1 << a | 1 << b;
                total += w;
            }
        }
        if ok {
            best = best.max(total);
        }
    }
    Ok(best)
}

fn best_subset(t: &Rooted, valid: impl Fn(u32) -> bool, maximise: bool) -> Result<i64, OracleError> {
    let n = check(t)?;
    let sizes = (0u32..1 << n).filter(|&s| valid(s)).map(|s| s.count_ones() as i64);
    Ok(if maximise { sizes.max() } else { sizes.min() }.expect("some subset is valid"))
}

pub fn max_independent_set(t: &Rooted) -> Result<i64, OracleError> {
    let es = edges(t);
    best_subset(t, |s| es.iter().all(|&(a, b, _)| !(has(s, a) && has(s, b))), true)
}

pub fn min_vertex_cover(t: &Rooted) -> Result<i64, OracleError> {
    let es = edges(t);
    best_subset(t, |s| es.iter().all(|&(a, b, _)| has(s, a) || has(s, b)), false)
}

pub fn min_dominating_set(t: &Rooted) -> Result<i64, OracleError> {
    let es = edges(t);
    let n = t.len();
    best_subset(
        t,
        |s| (0..n).all(|v| has(s, v) || es.iter().any(|&(a, b, _)| (a == v && has(s, b)) || (b == v && has(s, a)))),
        false,
    )
}

pub fn longest_path(t: &Rooted) -> Result<i64, OracleError> {
    let n = check(t)?;
    Ok((0..n).flat_map(|s| t.distances(s)).max().unwrap_or(0))
}

pub fn min_bisection(t: &Rooted) -> Result<i64, OracleError> {
    let n = check(t)?;
    let es = edges(t);
    Ok((0u32..1 << n)
        .filter(|s| s.count_ones() as usize == n / 2)
        .map(|s| es.iter().filter(|&&(a, b, _)| has(s, a) != has(s, b)).map(|e| e.2).sum::<i64>())
        .min()
        .expect("n >= 1"))
}

pub fn max_k_subtree(t: &Rooted, k: usize) -> Result<i64, OracleError> {
    let n = check(t)?;
    if k > n {
        return Err(OracleError::InfeasibleK { k, n });
    }
    if k == 0 {
        return Ok(0);
    }
    let es = edges(t);
    // A vertex set of a tree is connected iff it spans |S| - 1 edges.
    Ok((0u32..1 << n)
        .filter(|s| s.count_ones() as usize == k)
        .filter_map(|s| {
            let inside: Vec<i64> = es.iter().filter(|&&(a, b, _)| has(s, a) && has(s, b)).map(|e| e.2).collect();
            (inside.len() + 1 == k).then(|| inside.iter().sum())
        })
        .max()
        .expect("a tree has connected subsets of every size"))
}
