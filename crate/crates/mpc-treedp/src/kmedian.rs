//! k-median and k-center on trees, evaluated sequentially on the binary
//! extension.
//!
//! For a vertex `v` and `0 <= p <= k`:
//!
//! * `F_v^p(x)` is the best cost inside `T_v` with at most `p` medians in
//!   `T_v` when a median outside `T_v` sits at distance `x` from `v`;
//! * `G_v^p(x)` is the best cost inside `T_v` with at most `p` medians, one
//!   of them within distance `x` of `v`.
//!
//! `F` is piecewise linear and nondecreasing; it is only ever evaluated at
//! integer distances, so [`Pwl`] keeps it exact on the integers. `G` is a
//! nonincreasing step function with a step at every descendant distance.
//! Auxiliary vertices cost nothing and cannot hold a median.

use std::collections::HashMap;

use thiserror::Error;

use crate::binary_ext::{binary_extension_seq, tree_records, BRec, BinaryExtError};
use crate::tree::{Tree, TreeError};
use crate::value::{sadd, Value, INF};

#[derive(Debug, Error)]
pub enum KMedianError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("tree has no root record")]
    NoRoot,
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Extension(#[from] BinaryExtError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// Sum of distances to the nearest median.
    Median,
    /// Largest distance to the nearest center.
    Center,
}

impl Objective {
    fn join(self, a: Value, b: Value) -> Value {
        match self {
            Objective::Median => sadd(a, b),
            Objective::Center => a.max(b),
        }
    }
}

/// A function on the integers `x >= 0`, linear between integer breakpoints
/// and with slope `tail` after the last one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pwl {
    pts: Vec<(i64, i64)>,
    tail: i64,
}

impl Pwl {
    pub fn line(slope: i64, at_zero: i64) -> Pwl {
        Pwl { pts: vec![(0, at_zero)], tail: slope }
    }

    pub fn constant(c: i64) -> Pwl {
        Pwl::line(0, c)
    }

    pub fn points(&self) -> &[(i64, i64)] {
        &self.pts
    }

    pub fn tail(&self) -> i64 {
        self.tail
    }

    /// Value at `x >= 0`.
    pub fn eval(&self, x: i64) -> i64 {
        let i = self.pts.partition_point(|p| p.0 <= x) - 1;
        let (x0, y0) = self.pts[i];
        let slope = match self.pts.get(i + 1) {
            Some(&(x1, y1)) => (y1 - y0) / (x1 - x0),
            None => self.tail,
        };
        y0 + slope * (x - x0)
    }

    /// Value for `x -> infinity`, if bounded.
    pub fn at_infinity(&self) -> Option<i64> {
        (self.tail == 0).then(|| self.pts.last().expect("nonempty").1)
    }

    /// `x -> f(x + d)` for `d >= 0`.
    pub fn shift(&self, d: i64) -> Pwl {
        let mut pts = vec![(0, self.eval(d))];
        pts.extend(self.pts.iter().filter(|p| p.0 > d).map(|&(x, y)| (x - d, y)));
        Pwl { pts, tail: self.tail }.normalized()
    }

    pub fn add(&self, o: &Pwl) -> Pwl {
        self.combine(o, |a, b| a + b, false)
    }

    pub fn min(&self, o: &Pwl) -> Pwl {
        self.combine(o, i64::min, true)
    }

    pub fn max(&self, o: &Pwl) -> Pwl {
        self.combine(o, i64::max, true)
    }

    /// Slopes of all pieces, tail included.
    pub fn slopes(&self) -> impl Iterator<Item = i64> + '_ {
        self.pts
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .chain(std::iter::once(self.tail))
    }

    fn combine(&self, o: &Pwl, op: impl Fn(i64, i64) -> i64, crossings: bool) -> Pwl {
        let mut xs: Vec<i64> = self.pts.iter().chain(o.pts.iter()).map(|p| p.0).collect();
        xs.sort_unstable();
        xs.dedup();
        if crossings {
            let diff = |x: i64| self.eval(x) - o.eval(x);
            let mut extra = Vec::new();
            for w in xs.windows(2) {
                let (d0, d1) = (diff(w[0]), diff(w[1]));
                if (d0 < 0 && d1 > 0) || (d0 > 0 && d1 < 0) {
                    // The difference is linear on this interval.
                    let c = w[0] + d0.abs() * (w[1] - w[0]) / (d0.abs() + d1.abs());
                    extra.push(c);
                    extra.push(c + 1);
                }
            }
            let last = *xs.last().expect("nonempty");
            let d = diff(last);
            let dt = self.tail - o.tail;
            if d != 0 && dt != 0 && (d > 0) != (dt > 0) {
                let c = last + d.abs() / dt.abs();
                extra.push(c);
                extra.push(c + 1);
            }
            xs.extend(extra);
            xs.sort_unstable();
            xs.dedup();
        }
        let pts: Vec<(i64, i64)> = xs.iter().map(|&x| (x, op(self.eval(x), o.eval(x)))).collect();
        // Beyond the last point both inputs are linear and do not cross.
        let last = *xs.last().expect("nonempty");
        let ahead = op(self.eval(last + 1), o.eval(last + 1)) - pts.last().expect("nonempty").1;
        Pwl { pts, tail: ahead }.normalized()
    }

    fn normalized(mut self) -> Pwl {
        let mut out: Vec<(i64, i64)> = Vec::with_capacity(self.pts.len());
        for p in self.pts.drain(..) {
            while out.len() >= 2 {
                let (a, b) = (out[out.len() - 2], out[out.len() - 1]);
                if (b.1 - a.1) * (p.0 - b.0) == (p.1 - b.1) * (b.0 - a.0) {
                    out.pop();
                } else {
                    break;
                }
            }
            out.push(p);
        }
        while out.len() >= 2 {
            let (a, b) = (out[out.len() - 2], out[out.len() - 1]);
            if b.1 - a.1 == self.tail * (b.0 - a.0) {
                out.pop();
            } else {
                break;
            }
        }
        Pwl { pts: out, tail: self.tail }
    }
}

/// A nonincreasing step function: the value at `x` is the one of the last
/// step at or before `x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Steps {
    pts: Vec<(i64, Value)>,
}

impl Steps {
    pub fn points(&self) -> &[(i64, Value)] {
        &self.pts
    }

    pub fn eval(&self, x: i64) -> Value {
        match self.pts.partition_point(|p| p.0 <= x) {
            0 => INF,
            i => self.pts[i - 1].1,
        }
    }

    pub fn at_infinity(&self) -> Value {
        self.pts.last().map_or(INF, |p| p.1)
    }
}

/// `F_v^p` and `G_v^p` for `p = 0..=k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KMedianFunctions {
    pub f: Vec<Pwl>,
    pub g: Vec<Steps>,
}

/// Ways to spread `p` medians over `kids` children: `(i, p - i)` for two,
/// `(p)` for one, and the empty split for none.
fn splits(p: usize, kids: usize) -> Vec<[usize; 2]> {
    match kids {
        0 => vec![[0, 0]],
        1 => vec![[p, 0]],
        _ => (0..=p).map(|i| [i, p - i]).collect(),
    }
}

/// Functions at `v` from its children `(edge length, functions)`.
pub fn kmedian_node_update(objective: Objective, aux: bool, kids: &[(i64, &KMedianFunctions)], k: usize) -> KMedianFunctions {
    let own_at = |x: i64| if aux { 0 } else { x };
    let own = if aux { Pwl::constant(0) } else { Pwl::line(1, 0) };

    // G: a median at v itself, then one within each descendant distance.
    let mut g_at_zero = vec![INF; k + 1];
    if !aux {
        for (p, slot) in g_at_zero.iter_mut().enumerate().skip(1) {
            for s in splits(p - 1, kids.len()) {
                let v = kids.iter().enumerate().fold(0, |acc, (c, (xc, fc))| objective.join(acc, fc.f[s[c]].eval(*xc)));
                *slot = (*slot).min(v);
            }
        }
    }
    let mut events: Vec<(i64, usize)> = kids
        .iter()
        .enumerate()
        .flat_map(|(c, (xc, fc))| fc.g[0].pts.iter().map(move |&(b, _)| (xc + b, c)))
        .collect();
    events.sort_unstable();
    let mut g_pts: Vec<Vec<(i64, Value)>> = vec![vec![(0, 0)]; k + 1];
    for (p, pts) in g_pts.iter_mut().enumerate() {
        pts[0].1 = g_at_zero[p];
    }
    for (xm, c) in events {
        let (xa, fa) = kids[c];
        let other = kids.iter().enumerate().find(|&(j, _)| j != c).map(|(_, kid)| *kid);
        for (p, pts) in g_pts.iter_mut().enumerate() {
            let mut best = INF;
            for i in 0..=p {
                if other.is_none() && i != p {
                    continue;
                }
                let mut v = objective.join(own_at(xm), fa.g[i].eval(xm - xa));
                if let Some((xb, fb)) = other {
                    v = objective.join(v, fb.f[p - i].eval(xm + xb));
                }
                best = best.min(v);
            }
            let prev = pts.last().expect("nonempty").1;
            let val = prev.min(best);
            if pts.last().expect("nonempty").0 == xm {
                pts.last_mut().expect("nonempty").1 = val;
            } else {
                pts.push((xm, val));
            }
        }
    }
    let g: Vec<Steps> = g_pts.into_iter().map(|pts| Steps { pts }).collect();

    // F: ignore the outside median, or let v use it.
    let f = (0..=k)
        .map(|p| {
            let mut best: Option<Pwl> = None;
            for s in splits(p, kids.len()) {
                let mut acc = own.clone();
                for (c, (xc, fc)) in kids.iter().enumerate() {
                    let part = fc.f[s[c]].shift(*xc);
                    acc = match objective {
                        Objective::Median => acc.add(&part),
                        Objective::Center => acc.max(&part),
                    };
                }
                best = Some(match best {
                    Some(b) => b.min(&acc),
                    None => acc,
                });
            }
            let mut out = best.expect("at least one split");
            let inner = g[p].at_infinity();
            if inner != INF {
                out = out.min(&Pwl::constant(inner));
            }
            out
        })
        .collect();
    KMedianFunctions { f, g }
}

/// Evaluate the functions bottom-up; `visit` sees every vertex's functions.
pub fn kmedian_functions<V>(records: &[BRec], k: usize, objective: Objective, mut visit: V) -> Result<KMedianFunctions, KMedianError>
where
    V: FnMut(u64, &KMedianFunctions),
{
    let by_index: HashMap<u64, &BRec> = records.iter().map(|r| (r.index, r)).collect();
    let root = records.iter().find(|r| r.parent.is_none()).ok_or(KMedianError::NoRoot)?;
    let mut order = Vec::with_capacity(records.len());
    let mut stack = vec![root.index];
    while let Some(v) = stack.pop() {
        order.push(v);
        stack.extend(by_index[&v].children.iter().map(|c| c.index));
    }
    let mut done: HashMap<u64, KMedianFunctions> = HashMap::new();
    for &v in order.iter().rev() {
        let r = by_index[&v];
        let kids_owned: Vec<(i64, KMedianFunctions)> =
            r.children.iter().map(|c| (c.weight, done.remove(&c.index).expect("child first"))).collect();
        let kids: Vec<(i64, &KMedianFunctions)> = kids_owned.iter().map(|(x, f)| (*x, f)).collect();
        let fs = kmedian_node_update(objective, r.aux, &kids, k);
        visit(v, &fs);
        done.insert(v, fs);
    }
    Ok(done.remove(&root.index).expect("root done"))
}

/// Optimal cost with at most `k` medians (or centers) on the records' tree.
pub fn kmedian_records(records: &[BRec], k: usize, objective: Objective) -> Result<Value, KMedianError> {
    if k == 0 {
        return Err(KMedianError::ZeroK);
    }
    let root = kmedian_functions(records, k, objective, |_, _| {})?;
    Ok(root.g[k].at_infinity())
}

/// k-median or k-center of `tree` via its binary extension. Returns the
/// scaled cost and the weight scale.
pub fn solve_kmedian(tree: &Tree, k: usize, objective: Objective, machines: usize, seed: u64) -> Result<(Value, i64), KMedianError> {
    let (w, scale) = tree.scaled_weights()?;
    let weighted = crate::binary_ext::with_integer_weights(tree, &w);
    let (tb, _) = binary_extension_seq(&weighted, machines, seed)?;
    let (wb, _) = tb.scaled_weights()?;
    let recs = tree_records(&tb, &wb);
    Ok((kmedian_records(&recs, k, objective)?, scale))
}

/// Same computation directly on `tree`, which must have at most two
/// children per vertex.
pub fn kmedian_on_binary(tree: &Tree, k: usize, objective: Objective) -> Result<Value, KMedianError> {
    let (w, _) = tree.scaled_weights()?;
    kmedian_records(&tree_records(tree, &w), k, objective)
}
