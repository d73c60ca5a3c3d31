//! Linear-memory solver: a merge schedule over the component tree, splittable
//! partition data for minimum bisection and maximum k-spanning tree, and the
//! cluster pipeline that replays the schedule with chunk-pair merges.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::binary_ext::{binary_extension, tree_records, BRec, BinaryExtError, INDEX_DOMAIN};
use crate::decomposition::{decompose_distributed_then, ComponentTree, CtNode, DecompError};
use crate::dp::{chunk_count, pair_machine, PairRule, Reduction};
use crate::khash::{machine_hash, HashFn};
use crate::sim::{inbox_frames, Cluster, ClusterConfig, Mailer, Metrics, Resident, SimError, Word};
use crate::tree::{Tree, TreeError};
use crate::value::{madd, sadd, Value};

#[derive(Debug, Error)]
pub enum LinearError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Extension(#[from] BinaryExtError),
    #[error(transparent)]
    Decomposition(#[from] DecompError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("k = {k} exceeds the {n} vertices of the tree")]
    InfeasibleK { k: usize, n: usize },
    #[error("bad merge schedule: {0}")]
    Schedule(String),
}

impl LinearError {
    pub fn sim(&self) -> Option<&SimError> {
        match self {
            LinearError::Sim(e)
            | LinearError::Extension(BinaryExtError::Sim(e))
            | LinearError::Decomposition(DecompError::Sim(e)) => Some(e),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Merge schedule

/// A connected set of component-tree nodes.
pub type Part = BTreeSet<u64>;

fn part_top(ct: &ComponentTree, part: &Part) -> u64 {
    *part
        .iter()
        .find(|v| ct.nodes[v].parent.is_none_or(|p| !part.contains(&p)))
        .expect("non-empty part")
}

fn inner_children<'a>(ct: &'a ComponentTree, part: &'a Part, v: u64) -> impl Iterator<Item = u64> + 'a {
    ct.nodes[&v].children.iter().copied().filter(move |c| part.contains(c))
}

/// Sum of `f` over the part-internal subtree of every node.
fn below(ct: &ComponentTree, part: &Part, f: impl Fn(u64) -> usize) -> HashMap<u64, usize> {
    let mut order = Vec::with_capacity(part.len());
    let mut stack = vec![part_top(ct, part)];
    while let Some(v) = stack.pop() {
        order.push(v);
        stack.extend(inner_children(ct, part, v));
    }
    let mut acc = HashMap::with_capacity(part.len());
    for &v in order.iter().rev() {
        let s = f(v) + inner_children(ct, part, v).map(|c| acc[&c]).sum::<usize>();
        acc.insert(v, s);
    }
    acc
}

/// Descend from the top towards the heaviest child while it weighs more
/// than `limit`; returns the edge to the first child that does not.
fn descend(ct: &ComponentTree, part: &Part, w: &HashMap<u64, usize>, heavy: impl Fn(usize) -> bool) -> Option<(u64, u64)> {
    let mut v = part_top(ct, part);
    loop {
        let c = inner_children(ct, part, v).max_by_key(|c| (w[c], std::cmp::Reverse(*c)))?;
        if heavy(w[&c]) {
            v = c;
        } else {
            return Some((v, c));
        }
    }
}

/// Edge `(v, u)` cutting off the heaviest-child subtree at the first node
/// whose heaviest child holds at most `2/3` of the part.
pub fn first_cut(ct: &ComponentTree, part: &Part) -> Option<(u64, u64)> {
    if part.len() < 2 {
        return None;
    }
    let d = below(ct, part, |_| 1);
    let n = part.len();
    descend(ct, part, &d, |s| 3 * s > 2 * n)
}

/// Nodes of `part` adjacent to a node outside it.
pub fn borders(ct: &ComponentTree, part: &Part) -> Part {
    part.iter()
        .copied()
        .filter(|v| {
            let node = &ct.nodes[v];
            node.parent.is_some_and(|p| !part.contains(&p)) || node.children.iter().any(|c| !part.contains(c))
        })
        .collect()
}

/// Edge `(v, u)` where the subtree of `u` holds at most two borders and the
/// subtree of `v` more than two.
pub fn second_cut(ct: &ComponentTree, part: &Part, borders: &Part) -> Option<(u64, u64)> {
    if part.len() < 2 {
        return None;
    }
    let b = below(ct, part, |v| borders.contains(&v) as usize);
    descend(ct, part, &b, |s| s > 2)
}

/// Split `part` at edge `(_, u)` into (upper, lower).
fn split_at(ct: &ComponentTree, part: &Part, u: u64) -> (Part, Part) {
    let mut lower = Part::new();
    let mut stack = vec![u];
    while let Some(v) = stack.pop() {
        lower.insert(v);
        stack.extend(inner_children(ct, part, v));
    }
    let upper = part.difference(&lower).copied().collect();
    (upper, lower)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScheduleReport {
    /// `(lower, total)` part sizes of every first cut.
    pub first_cuts: Vec<(usize, usize)>,
    /// Most borders on any part right after a first cut.
    pub transient_borders: usize,
    /// Most borders on any part that survives a splitting step.
    pub max_borders: usize,
    /// Splitting steps until every part is a single node.
    pub split_steps: usize,
}

impl ScheduleReport {
    /// Whether every first cut left both sides within `[n/3, 2n/3]`.
    pub fn balanced(&self) -> bool {
        self.first_cuts.iter().all(|&(lo, n)| 3 * lo >= n && 3 * lo <= 2 * n)
    }
}

/// Merge steps `E_1, E_2, ...`: replaying them in order rebuilds the
/// component tree from single nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergeSchedule {
    pub steps: Vec<Vec<(u64, u64)>>,
    pub report: ScheduleReport,
}

/// Recursively split the component tree; the merge steps undo the splits in
/// reverse, second cuts of a split step before its first cuts.
pub fn build_merge_schedule(ct: &ComponentTree) -> MergeSchedule {
    let mut report = ScheduleReport::default();
    let mut parts: Vec<Part> = vec![ct.nodes.keys().copied().collect()];
    let mut split: Vec<(Vec<(u64, u64)>, Vec<(u64, u64)>)> = Vec::new();
    report.max_borders = borders(ct, &parts[0]).len();
    while parts.iter().any(|p| p.len() > 1) {
        let mut firsts = Vec::new();
        let mut seconds = Vec::new();
        let mut next = Vec::with_capacity(2 * parts.len());
        for p in parts {
            let Some((v, u)) = first_cut(ct, &p) else {
                next.push(p);
                continue;
            };
            firsts.push((v, u));
            let (upper, lower) = split_at(ct, &p, u);
            report.first_cuts.push((lower.len(), p.len()));
            for q in [upper, lower] {
                let bq = borders(ct, &q);
                report.transient_borders = report.transient_borders.max(bq.len());
                match (bq.len() >= 4).then(|| second_cut(ct, &q, &bq)).flatten() {
                    Some((x, y)) => {
                        seconds.push((x, y));
                        let (a, b) = split_at(ct, &q, y);
                        next.push(a);
                        next.push(b);
                    }
                    None => next.push(q),
                }
            }
        }
        for p in &next {
            report.max_borders = report.max_borders.max(borders(ct, p).len());
        }
        split.push((firsts, seconds));
        parts = next;
    }
    report.split_steps = split.len();
    let mut steps = Vec::with_capacity(2 * split.len());
    for (firsts, seconds) in split.into_iter().rev() {
        steps.push(seconds);
        steps.push(firsts);
    }
    MergeSchedule { steps, report }
}

/// One merge: the part topped by `lower` joins the part topped by `upper`
/// across the component-tree edge `(via, lower)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MergeOp {
    pub upper: u64,
    pub via: u64,
    pub lower: u64,
}

/// Check a schedule against the tree and name the parts it merges. Every
/// edge must be used once, join two distinct parts, and the replay must end
/// with a single part.
pub fn replay(ct: &ComponentTree, steps: &[Vec<(u64, u64)>]) -> Result<Vec<Vec<MergeOp>>, LinearError> {
    let mut top: HashMap<u64, u64> = ct.nodes.keys().map(|&v| (v, v)).collect();
    let mut members: HashMap<u64, Vec<u64>> = ct.nodes.keys().map(|&v| (v, vec![v])).collect();
    let mut used = BTreeSet::new();
    let mut out = Vec::with_capacity(steps.len());
    for step in steps {
        let mut ops = Vec::with_capacity(step.len());
        let mut touched = BTreeSet::new();
        for &(v, u) in step {
            if ct.nodes.get(&u).and_then(|n| n.parent) != Some(v) {
                return Err(LinearError::Schedule(format!("({v}, {u}) is not a tree edge")));
            }
            if !used.insert(u) {
                return Err(LinearError::Schedule(format!("edge ({v}, {u}) used twice")));
            }
            let (x, y) = (top[&v], top[&u]);
            if y != u || x == y {
                return Err(LinearError::Schedule(format!("edge ({v}, {u}) does not join two parts")));
            }
            if !touched.insert(x) || !touched.insert(y) {
                return Err(LinearError::Schedule(format!("part {x} or {y} merged twice in one step")));
            }
            ops.push(MergeOp { upper: x, via: v, lower: y });
        }
        for op in &ops {
            let moved = members.remove(&op.lower).expect("live part");
            for &w in &moved {
                top.insert(w, op.upper);
            }
            members.get_mut(&op.upper).expect("live part").extend(moved);
        }
        out.push(ops);
    }
    if members.len() != 1 {
        return Err(LinearError::Schedule(format!("{} parts remain", members.len())));
    }
    Ok(out)
}

/// Component tree from `(id, parent)` pairs.
pub fn component_tree_from(nodes: &[(u64, Option<u64>, usize)]) -> ComponentTree {
    let mut map: BTreeMap<u64, CtNode> = nodes
        .iter()
        .map(|&(id, parent, size)| (id, CtNode { id, parent, children: vec![], size }))
        .collect();
    for &(id, parent, _) in nodes {
        if let Some(p) = parent {
            if let Some(n) = map.get_mut(&p) {
                n.children.push(id);
            }
        }
    }
    for n in map.values_mut() {
        n.children.sort_unstable();
    }
    let root = map.values().find(|n| n.parent.is_none()).map_or(0, |n| n.id);
    ComponentTree { root, nodes: map }
}

// ---------------------------------------------------------------------------
// Partition data

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LinearKind {
    Bisection,
    KSpanning,
}

impl LinearKind {
    pub const ALL: [LinearKind; 2] = [LinearKind::Bisection, LinearKind::KSpanning];

    pub fn name(self) -> &'static str {
        match self {
            LinearKind::Bisection => "bisection",
            LinearKind::KSpanning => "kst",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn reduction(self) -> Reduction {
        match self {
            LinearKind::Bisection => Reduction::Min,
            LinearKind::KSpanning => Reduction::Max,
        }
    }

    fn flag_bits(self) -> usize {
        match self {
            LinearKind::Bisection => 0,
            LinearKind::KSpanning => 1,
        }
    }

    /// Boundary configurations of a part with `edges` outer edges.
    pub fn configs(self, edges: usize) -> usize {
        1 << (edges + self.flag_bits())
    }
}

/// Shape of a part's data: its outer edges (keyed by the child-side
/// component root) and its number of original vertices.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LinearMeta {
    pub edges: Vec<u64>,
    pub count: usize,
}

impl LinearMeta {
    pub fn len(&self, kind: LinearKind) -> usize {
        kind.configs(self.edges.len()) * (self.count + 1)
    }

    fn words(&self) -> usize {
        2 + self.edges.len()
    }
}

/// Data of a part, indexed `config * (count + 1) + b`. For bisection bit `i`
/// of the config is the colour of the part's endpoint of edge `i` and `b` the
/// number of original vertices coloured 1; the value is the least crossing
/// weight. For k-spanning tree bit `i` says edge `i` is used, the top bit
/// says the chosen subtree meets the part, `b` counts its original vertices
/// and the value is its greatest weight.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearData {
    pub meta: LinearMeta,
    pub values: Vec<Value>,
}

/// The edge two parts are merged across, described by its child-side vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeInfo {
    pub key: u64,
    pub weight: i64,
    pub aux: bool,
}

/// Per-vertex table over (state, mask, b).
struct Table {
    states: usize,
    masks: usize,
    count: usize,
    v: Vec<Value>,
}

impl Table {
    fn new(states: usize, masks: usize, count: usize, fill: Value) -> Self {
        Table { states, masks, count, v: vec![fill; states * masks * (count + 1)] }
    }

    fn at(&self, s: usize, mask: usize, b: usize) -> usize {
        (s * self.masks + mask) * (self.count + 1) + b
    }
}

const EMPTY: usize = 0;
const CLOSED: usize = 1;
const OPEN: usize = 2;

/// Data of the connected vertex set `records`. Outer edges are the edge to
/// the set root's parent and the edges to children outside the set.
pub fn compress_linear(kind: LinearKind, records: &[BRec]) -> LinearData {
    let by: HashMap<u64, &BRec> = records.iter().map(|r| (r.index, r)).collect();
    let root = records
        .iter()
        .find(|r| r.parent.is_none_or(|p| !by.contains_key(&p)))
        .expect("non-empty set");
    let mut edges: Vec<u64> = root.parent.map(|_| root.index).into_iter().collect();
    edges.extend(records.iter().flat_map(|r| r.children.iter().filter(|c| !by.contains_key(&c.index)).map(|c| c.index)));
    edges.sort_unstable();
    let bit = |key: u64| 1usize << edges.binary_search(&key).expect("outer edge");
    let down_at = |r: &BRec| -> usize { r.children.iter().filter(|c| !by.contains_key(&c.index)).map(|c| bit(c.index)).sum() };
    let up = root.parent.map_or(0, |_| bit(root.index));
    let masks = 1usize << edges.len();
    let red = kind.reduction();
    let add = |a: Value, b: Value| match kind {
        LinearKind::Bisection => sadd(a, b),
        LinearKind::KSpanning => madd(a, b),
    };

    let mut order = Vec::with_capacity(records.len());
    let mut stack = vec![root.index];
    while let Some(v) = stack.pop() {
        order.push(v);
        stack.extend(by[&v].children.iter().filter(|c| by.contains_key(&c.index)).map(|c| c.index));
    }
    let mut tabs: HashMap<u64, Table> = HashMap::with_capacity(records.len());
    for &v in order.iter().rev() {
        let r = by[&v];
        let own = (!r.aux) as usize;
        let down = down_at(r);
        let mut t = match kind {
            LinearKind::Bisection => {
                let mut t = Table::new(2, masks, own, red.identity());
                let i = t.at(0, 0, 0);
                t.v[i] = 0;
                let i = t.at(1, down | if v == root.index { up } else { 0 }, own);
                t.v[i] = 0;
                t
            }
            LinearKind::KSpanning => {
                let mut t = Table::new(3, masks, own, red.identity());
                let i = t.at(EMPTY, 0, 0);
                t.v[i] = 0;
                // Any subset of the outer down edges may be used.
                let mut sub = down;
                loop {
                    let i = t.at(OPEN, sub, own);
                    t.v[i] = 0;
                    if sub == 0 {
                        break;
                    }
                    sub = (sub - 1) & down;
                }
                t
            }
        };
        for c in r.children.iter().filter(|c| by.contains_key(&c.index)) {
            let ct = tabs.remove(&c.index).expect("child first");
            let step = |ps: usize, cs: usize| -> Option<(usize, Value)> {
                match kind {
                    LinearKind::Bisection if ps == cs => Some((ps, 0)),
                    LinearKind::Bisection => (!c.aux).then_some((ps, c.weight)),
                    LinearKind::KSpanning => match (ps, cs) {
                        (EMPTY, EMPTY) => Some((EMPTY, 0)),
                        (EMPTY, CLOSED) | (CLOSED, EMPTY) => Some((CLOSED, 0)),
                        (EMPTY, OPEN) => (!c.aux).then_some((CLOSED, 0)),
                        (OPEN, EMPTY) => Some((OPEN, 0)),
                        (OPEN, OPEN) => Some((OPEN, c.weight)),
                        _ => None,
                    },
                }
            };
            let mut nt = Table::new(t.states, masks, t.count + ct.count, red.identity());
            for ps in 0..t.states {
                for pm in 0..masks {
                    for pb in 0..=t.count {
                        let pv = t.v[t.at(ps, pm, pb)];
                        if pv == red.identity() {
                            continue;
                        }
                        for cs in 0..ct.states {
                            let Some((os, w)) = step(ps, cs) else { continue };
                            for cm in 0..masks {
                                for cb in 0..=ct.count {
                                    let cv = ct.v[ct.at(cs, cm, cb)];
                                    if cv == red.identity() {
                                        continue;
                                    }
                                    let i = nt.at(os, pm | cm, pb + cb);
                                    nt.v[i] = red.apply(nt.v[i], add(add(pv, cv), w));
                                }
                            }
                        }
                    }
                }
            }
            t = nt;
        }
        tabs.insert(v, t);
    }
    let t = tabs.remove(&root.index).expect("root table");
    let meta = LinearMeta { edges, count: t.count };
    let mut values = vec![red.identity(); meta.len(kind)];
    let l1 = t.count + 1;
    for mask in 0..masks {
        for b in 0..=t.count {
            match kind {
                LinearKind::Bisection => {
                    values[mask * l1 + b] = red.apply(t.v[t.at(0, mask, b)], t.v[t.at(1, mask, b)]);
                }
                LinearKind::KSpanning => {
                    let mut put = |cfg: usize, v: Value| values[cfg * l1 + b] = red.apply(values[cfg * l1 + b], v);
                    put(mask, t.v[t.at(EMPTY, mask, b)]);
                    put(mask | masks, t.v[t.at(CLOSED, mask, b)]);
                    let open = t.v[t.at(OPEN, mask, b)];
                    if up != 0 {
                        put(mask | up | masks, open);
                    }
                    if !root.aux {
                        put(mask | masks, open);
                    }
                }
            }
        }
    }
    LinearData { meta, values }
}

/// Pair rule merging a lower part into an upper one across one edge.
#[derive(Clone, Debug)]
pub struct LinearMerge {
    kind: LinearKind,
    edge: EdgeInfo,
    lx: usize,
    ly: usize,
    lo: usize,
    len_x: usize,
    len_y: usize,
    out_len: usize,
    /// Per config: (bit of the merge edge, flag, config bits in the output).
    cx: Vec<(bool, bool, usize)>,
    cy: Vec<(bool, bool, usize)>,
    out_flag: usize,
}

impl LinearMerge {
    pub fn new(kind: LinearKind, x: &LinearMeta, y: &LinearMeta, edge: EdgeInfo) -> Result<(Self, LinearMeta), LinearError> {
        let mut out: Vec<u64> = x.edges.iter().chain(&y.edges).copied().filter(|&e| e != edge.key).collect();
        out.sort_unstable();
        out.dedup();
        if out.len() + 2 != x.edges.len() + y.edges.len() {
            return Err(LinearError::Schedule(format!("edge {} is not shared by the merged parts", edge.key)));
        }
        let mo = LinearMeta { edges: out, count: x.count + y.count };
        let table = |m: &LinearMeta| -> Vec<(bool, bool, usize)> {
            let e = m.edges.len();
            (0..kind.configs(e))
                .map(|cfg| {
                    let mut ob = 0;
                    let mut eb = false;
                    for (i, k) in m.edges.iter().enumerate() {
                        let set = cfg >> i & 1 == 1;
                        if *k == edge.key {
                            eb = set;
                        } else if set {
                            ob |= 1 << mo.edges.binary_search(k).expect("kept edge");
                        }
                    }
                    (eb, kind.flag_bits() == 1 && cfg >> e & 1 == 1, ob)
                })
                .collect()
        };
        let rule = LinearMerge {
            kind,
            edge,
            lx: x.count + 1,
            ly: y.count + 1,
            lo: mo.count + 1,
            len_x: x.len(kind),
            len_y: y.len(kind),
            out_len: mo.len(kind),
            cx: table(x),
            cy: table(y),
            out_flag: 1 << mo.edges.len(),
        };
        Ok((rule, mo))
    }
}

impl PairRule for LinearMerge {
    fn left_len(&self) -> usize {
        self.len_x
    }

    fn right_len(&self) -> usize {
        self.len_y
    }

    fn output_len(&self) -> usize {
        self.out_len
    }

    fn reduction(&self) -> Reduction {
        self.kind.reduction()
    }

    #[inline]
    fn combine(&self, x: usize, a: Value, y: usize, b: Value) -> Option<(usize, Value)> {
        let (ex, fx, ox) = self.cx[x / self.lx];
        let (ey, fy, oy) = self.cy[y / self.ly];
        let count = x % self.lx + y % self.ly;
        match self.kind {
            LinearKind::Bisection => {
                let mut v = sadd(a, b);
                if ex != ey {
                    if self.edge.aux {
                        return None;
                    }
                    v = sadd(v, self.edge.weight);
                }
                Some(((ox | oy) * self.lo + count, v))
            }
            LinearKind::KSpanning => {
                if ex != ey {
                    return None;
                }
                let v = if ex { madd(madd(a, b), self.edge.weight) } else { madd(a, b) };
                if !ex && fx && fy {
                    return None;
                }
                let flag = if fx || fy { self.out_flag } else { 0 };
                Some(((ox | oy | flag) * self.lo + count, v))
            }
        }
    }
}

/// Merge `lower` into `upper` on one machine.
pub fn merge_linear(kind: LinearKind, upper: &LinearData, lower: &LinearData, edge: EdgeInfo) -> Result<LinearData, LinearError> {
    let (rule, meta) = LinearMerge::new(kind, &upper.meta, &lower.meta, edge)?;
    let values = crate::dp::merge_vectors(&rule, &upper.values, &lower.values);
    Ok(LinearData { meta, values })
}

/// Index of the answer in the data of the whole tree.
pub fn answer_index(kind: LinearKind, meta: &LinearMeta, k: usize) -> usize {
    let l1 = meta.count + 1;
    match kind {
        LinearKind::Bisection => meta.count / 2,
        LinearKind::KSpanning => (k > 0) as usize * l1 + k,
    }
}

fn check_k(kind: LinearKind, k: usize, n: usize) -> Result<(), LinearError> {
    if kind == LinearKind::KSpanning && k > n {
        return Err(LinearError::InfeasibleK { k, n });
    }
    Ok(())
}

/// Single-machine answer on the integer-weighted tree (`k` is ignored for
/// bisection).
pub fn solve_linear_sequential(kind: LinearKind, tree: &Tree, k: usize) -> Result<Value, LinearError> {
    check_k(kind, k, tree.original_count())?;
    let (w, _) = tree.scaled_weights()?;
    let d = compress_linear(kind, &tree_records(tree, &w));
    Ok(d.values[answer_index(kind, &d.meta, k)])
}

// ---------------------------------------------------------------------------
// Cluster pipeline

const INFO: Word = 1;
const ELEM: Word = 2;
const PART_A: Word = 3;
const PART_B: Word = 4;
const CAND: Word = 5;

struct PlanOp {
    op: MergeOp,
    rule: LinearMerge,
    chunk_x: usize,
    chunk_y: usize,
}

struct Plan {
    steps: Vec<Vec<PlanOp>>,
    root: u64,
    root_meta: LinearMeta,
    report: ScheduleReport,
    components: usize,
    words: usize,
}

#[derive(Default)]
struct LinMachine {
    elems: HashMap<u64, Vec<(usize, Value)>>,
    plan: Option<Arc<Plan>>,
    answer: Option<Value>,
    max_fan_in: usize,
    error: Option<String>,
}

impl Resident for LinMachine {
    fn resident_words(&self) -> usize {
        self.elems.values().map(|v| 1 + 2 * v.len()).sum::<usize>() + self.plan.as_ref().map_or(0, |p| p.words)
    }
}

/// Outcome of a linear-memory run.
#[derive(Clone, Debug)]
pub struct LinearReport {
    pub answer: Value,
    pub scale: i64,
    pub metrics: Metrics,
    pub extension_size: usize,
    pub components: usize,
    pub schedule: ScheduleReport,
    /// Merge steps that merged at least one pair of parts.
    pub merge_steps: usize,
    pub max_fan_in: usize,
}

fn element_home(h: &HashFn, pid: u64, idx: usize) -> usize {
    h.eval_unchecked(pid.wrapping_mul(1 << 24).wrapping_add(idx as u64) % INDEX_DOMAIN)
}

fn build_plan(kind: LinearKind, infos: &[(u64, Option<u64>, usize, i64, bool)]) -> Result<Plan, LinearError> {
    let ct = component_tree_from(&infos.iter().map(|&(id, p, l, _, _)| (id, p, l)).collect::<Vec<_>>());
    let info: HashMap<u64, (usize, i64, bool)> = infos.iter().map(|&(id, _, l, w, a)| (id, (l, w, a))).collect();
    let schedule = build_merge_schedule(&ct);
    let ops = replay(&ct, &schedule.steps)?;
    let mut metas: HashMap<u64, LinearMeta> = ct
        .nodes
        .values()
        .map(|n| {
            let mut edges: Vec<u64> = n.parent.map(|_| n.id).into_iter().chain(n.children.iter().copied()).collect();
            edges.sort_unstable();
            (n.id, LinearMeta { edges, count: info[&n.id].0 })
        })
        .collect();
    let mut words = 6 * infos.len();
    let mut steps = Vec::new();
    for step in ops {
        if step.is_empty() {
            continue;
        }
        let mut plan_ops = Vec::with_capacity(step.len());
        for op in step {
            let mx = metas.remove(&op.upper).expect("upper meta");
            let my = metas.remove(&op.lower).expect("lower meta");
            let (_, w, aux) = info[&op.lower];
            let (rule, mo) = LinearMerge::new(kind, &mx, &my, EdgeInfo { key: op.lower, weight: w, aux })?;
            words += 8 + mo.words() + rule.cx.len() + rule.cy.len();
            metas.insert(op.upper, mo);
            plan_ops.push(PlanOp { op, chunk_x: 0, chunk_y: 0, rule });
        }
        steps.push(plan_ops);
    }
    let root_meta = metas.remove(&ct.root).expect("root meta");
    Ok(Plan { steps, root: ct.root, root_meta, report: schedule.report, components: infos.len(), words })
}

/// Solve on the cluster with memory `config.words_per_machine` per machine.
pub fn solve_linear(kind: LinearKind, tree: &Tree, k: usize, config: &ClusterConfig) -> Result<LinearReport, LinearError> {
    check_k(kind, k, tree.original_count())?;
    let (weights, scale) = tree.scaled_weights()?;
    let tb = binary_extension(tree, &weights, config)?;
    let extension_size = tb.len();
    let m = config.machines;
    let h = machine_hash(config.seed ^ 0x6c69_6e65_6172, INDEX_DOMAIN, m);
    let red = kind.reduction();
    let dd = decompose_distributed_then(&tb, config, |_, comps, mail| {
        for c in comps.values() {
            let root = c.records.iter().find(|r| r.index == c.id).expect("component root");
            let count = c.records.iter().filter(|r| !r.aux).count();
            mail.push_all(&[INFO, c.id, c.parent.map_or(0, |p| p + 1), count as Word, root.weight as Word, root.aux as Word]);
            let d = compress_linear(kind, &c.records);
            for (i, &v) in d.values.iter().enumerate() {
                if v != red.identity() {
                    mail.push(element_home(&h, c.id, i), &[ELEM, c.id, i as Word, v as Word]);
                }
            }
        }
    })?;
    let mut metrics = tb.metrics.clone();
    metrics.extend(&dd.metrics);
    let kk = chunk_count(m);
    let states: Vec<LinMachine> = (0..m).map(|_| LinMachine::default()).collect();
    let mut cluster = Cluster::resume(config.clone(), states, dd.pending)?;
    let mut round = 0usize;
    loop {
        let r = round;
        cluster.round(|ctx, st, inbox, out| {
            let mut mail = Mailer::new(ctx.machines);
            let mut cands: HashMap<(u64, usize), (Value, usize)> = HashMap::new();
            let mut pairs: BTreeMap<(usize, usize, usize), (Vec<(usize, Value)>, Vec<(usize, Value)>)> = BTreeMap::new();
            let mut infos = Vec::new();
            for f in inbox_frames(inbox) {
                match f[0] {
                    INFO => infos.push((f[1], f[2].checked_sub(1), f[3] as usize, f[4] as i64, f[5] == 1)),
                    ELEM => st.elems.entry(f[1]).or_default().push((f[2] as usize, f[3] as Value)),
                    PART_A | PART_B => {
                        let e = pairs.entry((f[1] as usize, f[2] as usize, f[3] as usize)).or_default();
                        let side = if f[0] == PART_A { &mut e.0 } else { &mut e.1 };
                        side.push((f[4] as usize, f[5] as Value));
                    }
                    CAND => {
                        let e = cands.entry((f[1], f[2] as usize)).or_insert((red.identity(), 0));
                        e.0 = red.apply(e.0, f[3] as Value);
                        e.1 += 1;
                    }
                    _ => {}
                }
            }
            if r == 0 {
                match build_plan(kind, &infos) {
                    Ok(mut p) => {
                        for op in p.steps.iter_mut().flatten() {
                            op.chunk_x = op.rule.left_len().div_ceil(kk).max(1);
                            op.chunk_y = op.rule.right_len().div_ceil(kk).max(1);
                        }
                        st.plan = Some(Arc::new(p));
                    }
                    Err(e) => {
                        st.error = Some(e.to_string());
                        return;
                    }
                }
            }
            let plan = st.plan.clone().expect("plan built in the first round");
            // Odd rounds: sub-unify the chunk pairs received.
            if r % 2 == 1 {
                let step = &plan.steps[r / 2];
                for ((oi, _, _), (a, b)) in pairs {
                    let op = &step[oi];
                    let mut best: HashMap<usize, Value> = HashMap::new();
                    for &(x, av) in &a {
                        for &(y, bv) in &b {
                            if let Some((o, v)) = op.rule.combine(x, av, y, bv) {
                                best.entry(o).and_modify(|w| *w = red.apply(*w, v)).or_insert(v);
                            }
                        }
                    }
                    for (o, v) in best {
                        if v != red.identity() {
                            mail.push(element_home(&h, op.op.upper, o), &[CAND, op.op.upper, o as Word, v as Word]);
                        }
                    }
                }
                mail.flush(out);
                return;
            }
            // Even rounds: unify, then ship the next step or finish.
            for ((pid, idx), (v, fan)) in cands {
                st.max_fan_in = st.max_fan_in.max(fan);
                st.elems.entry(pid).or_default().push((idx, v));
            }
            let t = r / 2;
            if t < plan.steps.len() {
                for (oi, op) in plan.steps[t].iter().enumerate() {
                    let off = op.op.upper as usize % ctx.machines;
                    for (pid, side, size) in [(op.op.upper, PART_A, op.chunk_x), (op.op.lower, PART_B, op.chunk_y)] {
                        for (idx, v) in st.elems.remove(&pid).unwrap_or_default() {
                            let c = idx / size;
                            for other in 0..kk {
                                let (i, j) = if side == PART_A { (c, other) } else { (other, c) };
                                let to = pair_machine(i, j, kk, off, ctx.machines);
                                mail.push(to, &[side, oi as Word, i as Word, j as Word, idx as Word, v as Word]);
                            }
                        }
                    }
                }
            } else {
                let target = answer_index(kind, &plan.root_meta, k);
                if element_home(&h, plan.root, target) == ctx.machine {
                    let v = st.elems.get(&plan.root).and_then(|e| e.iter().find(|p| p.0 == target)).map_or(red.identity(), |p| p.1);
                    st.answer = Some(v);
                }
            }
            mail.flush(out);
        })?;
        if let Some(e) = cluster.states().iter().find_map(|s| s.error.clone()) {
            return Err(LinearError::Schedule(e));
        }
        let steps = cluster.states()[0].plan.as_ref().map_or(0, |p| p.steps.len());
        if round.is_multiple_of(2) && round / 2 >= steps {
            break;
        }
        round += 1;
    }
    let (states, m2) = cluster.into_parts();
    metrics.extend(&m2);
    let plan = states[0].plan.clone().expect("plan");
    let answer = states.iter().find_map(|s| s.answer).ok_or_else(|| LinearError::Schedule("no answer".into()))?;
    Ok(LinearReport {
        answer,
        scale,
        metrics,
        extension_size,
        components: plan.components,
        schedule: plan.report.clone(),
        merge_steps: plan.steps.len(),
        max_fan_in: states.iter().map(|s| s.max_fan_in).max().unwrap_or(0),
    })
}
