//! Kruskal and quadratic scans.

use mpc_treedp::geo::Edge;
use mpc_treedp::tree::PointSet;

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

/// Minimum spanning forest by `(weight, id)`, edges in that order.
pub fn kruskal(n: usize, edges: &[Edge]) -> Vec<Edge> {
    let mut parent: Vec<usize> = (0..n).collect();
    let mut sorted = edges.to_vec();
    sorted.sort_by_key(|e| (e.weight, e.id));
    sorted
        .into_iter()
        .filter(|e| {
            let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
            if a == b {
                return false;
            }
            parent[a] = b;
            true
        })
        .collect()
}

/// All pairs `u < v` with id `u * n + v`.
pub fn complete_graph(points: &PointSet, f: impl Fn(&[i64], &[i64]) -> u64) -> Vec<Edge> {
    let n = points.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for u in 0..n {
        for v in u + 1..n {
            out.push(Edge { u, v, weight: f(&points.coords[u], &points.coords[v]), id: (u * n + v) as u64 });
        }
    }
    out
}

pub fn complete_graph_mst(points: &PointSet, f: impl Fn(&[i64], &[i64]) -> u64) -> Vec<Edge> {
    kruskal(points.len(), &complete_graph(points, f))
}

/// Closest pair `(u, v, distance)` with `u < v`, ties to the smallest pair.
pub fn closest_pair(points: &PointSet, f: impl Fn(&[i64], &[i64]) -> u64) -> Option<(usize, usize, u64)> {
    let n = points.len();
    (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .map(|(u, v)| (f(&points.coords[u], &points.coords[v]), u, v))
        .min()
        .map(|(d, u, v)| (u, v, d))
}
