//! Closest pair, metric MST and sparse-graph MST on the cluster.
//!
//! Points have integer coordinates and distances are compared through an
//! integer oracle (squared Euclidean by default), so every comparison is
//! exact. Edges are ordered by `(weight, id)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::binary_ext::INDEX_DOMAIN;
use crate::khash::{machine_hash, HashFn};
use crate::sim::{ceil_log2, inbox_frames, Cluster, ClusterConfig, Mailer, Metrics, Resident, SimError, Word};
use crate::tree::PointSet;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("need at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("{machines} machines exceed n^(2/3) for n = {n}")]
    TooManyMachines { machines: usize, n: usize },
    #[error("edge ({u}, {v}) names a vertex outside 0..{n}")]
    BadEdge { u: usize, v: usize, n: usize },
    #[error("no termination after {super_rounds} super-rounds")]
    NonTermination { super_rounds: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// An undirected edge. `id` breaks weight ties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: u64,
    pub id: u64,
}

impl Edge {
    pub fn key(&self) -> (u64, u64) {
        (self.weight, self.id)
    }
}

/// Squared Euclidean distance.
pub fn squared_euclidean(a: &[i64], b: &[i64]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = (x as i128 - y as i128).unsigned_abs();
            d * d
        })
        .sum::<u128>()
        .min(u64::MAX as u128) as u64
}

/// Edge between points `u < v` of a set of `n` points.
pub fn point_edge(n: usize, u: usize, v: usize, weight: u64) -> Edge {
    let (u, v) = (u.min(v), u.max(v));
    Edge { u, v, weight, id: (u * n + v) as u64 }
}

fn check_machines(n: usize, machines: usize) -> Result<(), GeoError> {
    if n < 2 {
        return Err(GeoError::TooFewPoints(n));
    }
    // m <= n^(2/3)  <=>  m^3 <= n^2
    if (machines as u128).pow(3) > (n as u128).pow(2) {
        return Err(GeoError::TooManyMachines { machines, n });
    }
    Ok(())
}

/// Random assignment of points to `k` groups.
pub struct Groups {
    pub k: usize,
    h: HashFn,
}

impl Groups {
    pub fn new(machines: usize, seed: u64) -> Self {
        Groups { k: crate::dp::chunk_count(machines), h: machine_hash(seed ^ 0x67_726f_7570, INDEX_DOMAIN, 1 << 32) }
    }

    pub fn of(&self, point: usize) -> usize {
        self.h.eval_unchecked(point as u64) % self.k
    }

    /// Machine hosting the unordered group pair `{a, b}`.
    pub fn pair_machine(&self, a: usize, b: usize, machines: usize) -> usize {
        (a.min(b) * self.k + a.max(b)) % machines
    }

    pub fn sizes(&self, n: usize) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for i in 0..n {
            s[self.of(i)] += 1;
        }
        s
    }
}

const POINT: Word = 1;
const BEST: Word = 2;

#[derive(Default)]
struct PointMachine {
    points: Vec<(usize, Vec<i64>)>,
    best: Option<(u64, usize, usize)>,
}

impl Resident for PointMachine {
    fn resident_words(&self) -> usize {
        self.points.iter().map(|p| 1 + p.1.len()).sum::<usize>() + 3
    }
}

fn initial_points(points: &PointSet, machines: usize) -> Vec<PointMachine> {
    let mut st: Vec<PointMachine> = (0..machines).map(|_| PointMachine::default()).collect();
    for (i, p) in points.coords.iter().enumerate() {
        st[i % machines].points.push((i, p.clone()));
    }
    st
}

/// Send every point to the machines of the group pairs its group is part of.
fn scatter(st: &mut PointMachine, groups: &Groups, machines: usize, mail: &mut Mailer) {
    for (i, p) in st.points.drain(..) {
        let g = groups.of(i);
        let mut frame = vec![POINT, i as Word];
        frame.extend(p.iter().map(|&x| x as Word));
        let targets: BTreeSet<usize> = (0..groups.k).map(|o| groups.pair_machine(g, o, machines)).collect();
        for t in targets {
            mail.push(t, &frame);
        }
    }
}

/// The points received by a pair machine, keyed by group pair hosted there.
fn gather(inbox: &[crate::sim::Message], groups: &Groups) -> BTreeMap<usize, (usize, Vec<i64>)> {
    let mut pts = BTreeMap::new();
    for f in inbox_frames(inbox) {
        if f[0] == POINT {
            let i = f[1] as usize;
            pts.insert(i, (groups.of(i), f[2..].iter().map(|&x| x as i64).collect()));
        }
    }
    pts
}

/// Group pairs `{a, b}` with `a <= b` hosted on `machine`.
fn hosted_pairs(groups: &Groups, machine: usize, machines: usize) -> Vec<(usize, usize)> {
    (0..groups.k)
        .flat_map(|a| (a..groups.k).map(move |b| (a, b)))
        .filter(|&(a, b)| groups.pair_machine(a, b, machines) == machine)
        .collect()
}

#[derive(Clone, Debug)]
pub struct ClosestPair {
    pub u: usize,
    pub v: usize,
    pub distance: u64,
    pub metrics: Metrics,
}

/// Closest pair under `f` in three rounds: scatter to group pairs, local
/// minimum per pair machine, global minimum on machine 0.
pub fn closest_pair<F>(points: &PointSet, f: F, config: &ClusterConfig) -> Result<ClosestPair, GeoError>
where
    F: Fn(&[i64], &[i64]) -> u64 + Sync,
{
    let n = points.len();
    let m = config.machines;
    check_machines(n, m)?;
    let groups = Groups::new(m, config.seed);
    let mut cluster = Cluster::new(config.clone(), initial_points(points, m))?;
    for round in 0..3 {
        cluster.round(|ctx, st, inbox, out| {
            let mut mail = Mailer::new(ctx.machines);
            match round {
                0 => scatter(st, &groups, ctx.machines, &mut mail),
                1 => {
                    let pts = gather(inbox, &groups);
                    let mut best: Option<(u64, usize, usize)> = None;
                    for (a, b) in hosted_pairs(&groups, ctx.machine, ctx.machines) {
                        let left: Vec<_> = pts.iter().filter(|p| p.1 .0 == a).collect();
                        let right: Vec<_> = pts.iter().filter(|p| p.1 .0 == b).collect();
                        for &(&i, (_, pi)) in &left {
                            for &(&j, (_, pj)) in &right {
                                if (a == b && i >= j) || i == j {
                                    continue;
                                }
                                let c = (f(pi, pj), i.min(j), i.max(j));
                                best = Some(best.map_or(c, |b| b.min(c)));
                            }
                        }
                    }
                    if let Some((d, i, j)) = best {
                        mail.push(0, &[BEST, d, i as Word, j as Word]);
                    }
                }
                _ => {
                    st.best = inbox_frames(inbox)
                        .filter(|f| f[0] == BEST)
                        .map(|f| (f[1], f[2] as usize, f[3] as usize))
                        .min();
                }
            }
            mail.flush(out);
        })?;
    }
    let (states, metrics) = cluster.into_parts();
    let (distance, u, v) = states[0].best.expect("some pair exists");
    Ok(ClosestPair { u, v, distance, metrics })
}

/// Spanning forest that keeps the minimum spanning forest of every edge
/// inserted so far.
#[derive(Clone, Debug, Default)]
pub struct LocalMstFilter {
    adj: HashMap<usize, Vec<Edge>>,
    len: usize,
}

impl LocalMstFilter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Tree path from `from` to `to`, as edges.
    fn path(&self, from: usize, to: usize) -> Option<Vec<Edge>> {
        let mut prev: HashMap<usize, Edge> = HashMap::new();
        let mut seen = BTreeSet::from([from]);
        let mut stack = vec![from];
        while let Some(x) = stack.pop() {
            if x == to {
                let mut out = vec![];
                let mut cur = to;
                while cur != from {
                    let e = prev[&cur];
                    out.push(e);
                    cur = if e.u == cur { e.v } else { e.u };
                }
                return Some(out);
            }
            for e in self.adj.get(&x).into_iter().flatten() {
                let y = if e.u == x { e.v } else { e.u };
                if seen.insert(y) {
                    prev.insert(y, *e);
                    stack.push(y);
                }
            }
        }
        None
    }

    fn unlink(&mut self, e: &Edge) {
        for x in [e.u, e.v] {
            if let Some(l) = self.adj.get_mut(&x) {
                l.retain(|f| f.id != e.id || f.weight != e.weight);
            }
        }
        self.len -= 1;
    }

    /// Insert `e`; returns the edge evicted from the cycle it closes, which
    /// may be `e` itself.
    pub fn insert(&mut self, e: Edge) -> Option<Edge> {
        if e.u == e.v {
            return Some(e);
        }
        if let Some(path) = self.path(e.u, e.v) {
            let worst = *path.iter().max_by_key(|p| p.key()).expect("non-empty path");
            if e.key() > worst.key() {
                return Some(e);
            }
            self.unlink(&worst);
            self.link(e);
            return Some(worst);
        }
        self.link(e);
        None
    }

    fn link(&mut self, e: Edge) {
        self.adj.entry(e.u).or_default().push(e);
        self.adj.entry(e.v).or_default().push(e);
        self.len += 1;
    }

    /// Retained edges by `(weight, id)`.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out: Vec<Edge> = self.adj.iter().flat_map(|(&x, l)| l.iter().filter(move |e| e.u == x).copied()).collect();
        out.sort_by_key(Edge::key);
        out
    }
}

/// Stream `edges` through a [`LocalMstFilter`]; returns (retained, evicted).
pub fn local_mst_filter(edges: impl IntoIterator<Item = Edge>) -> (Vec<Edge>, Vec<Edge>) {
    let mut f = LocalMstFilter::new();
    let evicted = edges.into_iter().filter_map(|e| f.insert(e)).collect();
    (f.edges(), evicted)
}

/// A minimum spanning tree (or forest) and how it was found.
#[derive(Clone, Debug)]
pub struct MstReport {
    /// Tree edges by `(weight, id)`.
    pub edges: Vec<Edge>,
    pub metrics: Metrics,
    pub super_rounds: usize,
    /// Edges handed to the sparse phase.
    pub candidates: usize,
}

impl MstReport {
    pub fn total(&self) -> u128 {
        self.edges.iter().map(|e| e.weight as u128).sum()
    }

    /// Sum of square roots of the weights, for squared-distance weights.
    pub fn euclidean_weight(&self) -> f64 {
        self.edges.iter().map(|e| (e.weight as f64).sqrt()).sum()
    }
}

const EDGE: Word = 3;
const CAND: Word = 4;
const CHILD: Word = 5;
const SETPTR: Word = 6;
const RELABEL: Word = 7;

#[derive(Clone, Copy, Debug)]
struct LiveEdge {
    e: Edge,
    lu: usize,
    lv: usize,
}

/// Candidate outgoing edge of a component: (weight, id, other side, edge).
type Cand = (u64, u64, usize, Edge);

fn lighter(a: Cand, b: Cand) -> Cand {
    if (b.0, b.1) < (a.0, a.1) {
        b
    } else {
        a
    }
}

#[derive(Clone, Debug, Default)]
struct Comp {
    ptr: usize,
    children: BTreeSet<usize>,
    subscribers: BTreeSet<usize>,
}

#[derive(Default)]
struct BoruvkaMachine {
    edges: Vec<LiveEdge>,
    comps: BTreeMap<usize, Comp>,
    chosen: Vec<Edge>,
}

impl Resident for BoruvkaMachine {
    fn resident_words(&self) -> usize {
        6 * self.edges.len()
            + 4 * self.chosen.len()
            + self.comps.values().map(|c| 2 + c.children.len() + c.subscribers.len()).sum::<usize>()
    }
}

fn edge_frame(tag: Word, e: &Edge) -> Vec<Word> {
    vec![tag, e.u as Word, e.v as Word, e.weight, e.id]
}

fn frame_edge(f: &[Word]) -> Edge {
    Edge { u: f[1] as usize, v: f[2] as usize, weight: f[3], id: f[4] }
}

/// Rounds a super-round may take: `ceil(log2 n) + 3`.
pub fn super_round_ceiling(n: usize) -> usize {
    ceil_log2(n.max(2)) as usize + 3
}

/// Borůvka on the cluster, edges placed by a hash of their id.
pub fn sparse_mst(n: usize, edges: &[Edge], config: &ClusterConfig) -> Result<MstReport, GeoError> {
    let m = config.machines;
    let he = machine_hash(config.seed ^ 0x6564_6765, INDEX_DOMAIN, m);
    let mut shards: Vec<Vec<Edge>> = vec![Vec::new(); m];
    for e in edges {
        if e.u >= n || e.v >= n {
            return Err(GeoError::BadEdge { u: e.u, v: e.v, n });
        }
        shards[he.eval_unchecked(e.id % INDEX_DOMAIN)].push(*e);
    }
    sparse_mst_sharded(n, shards, config, Metrics::default())
}

/// Each super-round: components send their lightest outgoing edge to the
/// component's home, homes point across it (the smaller end of a 2-cycle
/// becomes the root), pointer jumping finds the roots and the homes tell
/// the edge machines the new labels. Jumps per super-round shrink with the
/// number of active components, which at least halves every time.
fn sparse_mst_sharded(n: usize, shards: Vec<Vec<Edge>>, config: &ClusterConfig, mut metrics: Metrics) -> Result<MstReport, GeoError> {
    let candidates = shards.iter().map(Vec::len).sum();
    let m = config.machines;
    let hv = machine_hash(config.seed ^ 0x7665_7274, INDEX_DOMAIN, m);
    let home = |c: usize| hv.eval_unchecked(c as u64);
    let mut states: Vec<BoruvkaMachine> = shards
        .into_iter()
        .map(|es| BoruvkaMachine {
            edges: es.into_iter().filter(|e| e.u != e.v).map(|e| LiveEdge { e, lu: e.u, lv: e.v }).collect(),
            ..BoruvkaMachine::default()
        })
        .collect();
    for v in 0..n {
        states[home(v)].comps.insert(v, Comp { ptr: v, ..Comp::default() });
    }
    let log_n = ceil_log2(n.max(2)) as usize;
    let mut cluster = Cluster::new(config.clone(), states)?;
    let mut super_rounds = 0;
    loop {
        cluster.round(|ctx, st, inbox, out| {
            let mut mail = Mailer::new(ctx.machines);
            let relabel: HashMap<usize, usize> =
                inbox_frames(inbox).filter(|f| f[0] == RELABEL).map(|f| (f[1] as usize, f[2] as usize)).collect();
            for le in &mut st.edges {
                le.lu = relabel.get(&le.lu).copied().unwrap_or(le.lu);
                le.lv = relabel.get(&le.lv).copied().unwrap_or(le.lv);
            }
            st.edges.retain(|le| le.lu != le.lv);
            let mut best: BTreeMap<usize, Cand> = BTreeMap::new();
            for le in &st.edges {
                for (c, o) in [(le.lu, le.lv), (le.lv, le.lu)] {
                    let cand = (le.e.weight, le.e.id, o, le.e);
                    best.entry(c).and_modify(|b| *b = lighter(*b, cand)).or_insert(cand);
                }
            }
            for (c, (_, _, o, e)) in best {
                let mut f = edge_frame(CAND, &e);
                f.extend([c as Word, o as Word]);
                mail.push(home(c), &f);
            }
            mail.flush(out);
        })?;
        if !cluster.has_pending() {
            break;
        }
        if super_rounds == log_n {
            return Err(GeoError::NonTermination { super_rounds });
        }
        super_rounds += 1;
        cluster.round(|ctx, st, inbox, out| {
            let mut mail = Mailer::new(ctx.machines);
            let mut best: BTreeMap<usize, Cand> = BTreeMap::new();
            for msg in inbox {
                for f in crate::sim::frames(&msg.payload).filter(|f| f[0] == CAND) {
                    let (c, o) = (f[5] as usize, f[6] as usize);
                    st.comps.get_mut(&c).expect("component home").subscribers.insert(msg.sender);
                    let cand = (f[3], f[4], o, frame_edge(f));
                    best.entry(c).and_modify(|b| *b = lighter(*b, cand)).or_insert(cand);
                }
            }
            for (&c, comp) in st.comps.iter_mut() {
                comp.ptr = best.get(&c).map_or(c, |b| b.2);
                if let Some(b) = best.get(&c) {
                    st.chosen.push(b.3);
                }
                mail.push(home(comp.ptr), &[CHILD, c as Word, comp.ptr as Word]);
            }
            mail.flush(out);
        })?;
        let jumps = log_n.saturating_sub(super_rounds - 1).max(1);
        for j in 0..=jumps {
            cluster.round(|ctx, st, inbox, out| {
                let mut mail = Mailer::new(ctx.machines);
                let mut by_parent: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
                for f in inbox_frames(inbox) {
                    match f[0] {
                        SETPTR => st.comps.get_mut(&(f[1] as usize)).expect("home").ptr = f[2] as usize,
                        CHILD => {
                            by_parent.entry(f[2] as usize).or_default().insert(f[1] as usize);
                        }
                        _ => {}
                    }
                }
                for (&c, comp) in st.comps.iter_mut() {
                    comp.children = by_parent.remove(&c).unwrap_or_default();
                    if j == 0 && comp.ptr != c && comp.children.contains(&comp.ptr) {
                        if c < comp.ptr {
                            comp.ptr = c;
                            comp.children.insert(c);
                        } else {
                            comp.children.remove(&comp.ptr);
                        }
                    }
                }
                if j < jumps {
                    for comp in st.comps.values() {
                        for &k in &comp.children {
                            mail.push(home(k), &[SETPTR, k as Word, comp.ptr as Word]);
                            mail.push(home(comp.ptr), &[CHILD, k as Word, comp.ptr as Word]);
                        }
                    }
                } else {
                    // Pointers are roots now: relabel and retire absorbed components.
                    for (&c, comp) in &st.comps {
                        if comp.ptr != c {
                            for &s in &comp.subscribers {
                                mail.push(s, &[RELABEL, c as Word, comp.ptr as Word]);
                            }
                        }
                    }
                    st.comps.retain(|&c, comp| comp.ptr == c);
                    for comp in st.comps.values_mut() {
                        comp.subscribers.clear();
                    }
                }
                mail.flush(out);
            })?;
        }
    }
    let (states, m2) = cluster.into_parts();
    metrics.extend(&m2);
    let mut edges: Vec<Edge> = states.into_iter().flat_map(|s| s.chosen).collect();
    edges.sort_by_key(Edge::key);
    edges.dedup_by_key(|e| e.key());
    Ok(MstReport { edges, metrics, super_rounds, candidates })
}

/// Minimum spanning tree of the complete graph on `points` under `f`.
/// Points are split into `ceil(sqrt m)` random groups; the machine of each
/// group pair streams every pair of the union through a
/// [`LocalMstFilter`] and forwards the survivors to [`sparse_mst`].
pub fn metric_mst<F>(points: &PointSet, f: F, config: &ClusterConfig) -> Result<MstReport, GeoError>
where
    F: Fn(&[i64], &[i64]) -> u64 + Sync,
{
    let n = points.len();
    let m = config.machines;
    check_machines(n, m)?;
    let groups = Groups::new(m, config.seed);
    let he = machine_hash(config.seed ^ 0x6564_6765, INDEX_DOMAIN, m);
    let mut cluster = Cluster::new(config.clone(), initial_points(points, m))?;
    for round in 0..2 {
        cluster.round(|ctx, st, inbox, out| {
            let mut mail = Mailer::new(ctx.machines);
            if round == 0 {
                scatter(st, &groups, ctx.machines, &mut mail);
            } else {
                let pts = gather(inbox, &groups);
                for (a, b) in hosted_pairs(&groups, ctx.machine, ctx.machines) {
                    let union: Vec<(&usize, &Vec<i64>)> =
                        pts.iter().filter(|p| p.1 .0 == a || p.1 .0 == b).map(|(i, (_, c))| (i, c)).collect();
                    let mut filter = LocalMstFilter::new();
                    for (x, &(&i, pi)) in union.iter().enumerate() {
                        for &(&j, pj) in &union[x + 1..] {
                            filter.insert(point_edge(n, i, j, f(pi, pj)));
                        }
                    }
                    for e in filter.edges() {
                        mail.push(he.eval_unchecked(e.id % INDEX_DOMAIN), &edge_frame(EDGE, &e));
                    }
                }
            }
            mail.flush(out);
        })?;
    }
    let (_, inboxes, metrics) = cluster.into_pending();
    // The survivors arrive at their hashed machines; a pair seen by several
    // group pairs arrives there several times.
    let shards: Vec<Vec<Edge>> = inboxes
        .iter()
        .map(|inbox| {
            let mut es: Vec<Edge> = inbox_frames(inbox).filter(|f| f[0] == EDGE).map(frame_edge).collect();
            es.sort_by_key(Edge::key);
            es.dedup_by_key(|e| e.key());
            es
        })
        .collect();
    sparse_mst_sharded(n, shards, config, metrics)
}
