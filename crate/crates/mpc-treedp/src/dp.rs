//! Shared machinery for tree dynamic programs on binary extensions.
//!
//! Two kinds of problems are supported. Polylog problems have a constant
//! number of states per vertex and a max-plus node rule; a component is
//! compressed into a table over the states of its (at most two) unknown
//! leaves, and tables are merged by substitution. Linear problems keep a
//! vector per component and merge two vectors with a pairwise rule in which
//! every element pair affects at most one output element, which is what lets
//! the merge be cut into chunk pairs and spread over machines.

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use thiserror::Error;

use crate::binary_ext::{BRec, ChildRef, INDEX_DOMAIN};
use crate::khash::{machine_hash, HashFn};
use crate::sim::{inbox_frames, Cluster, ClusterConfig, Mailer, Metrics, Resident, SimError, Word};
use crate::value::{madd, Value, INF, NEG_INF};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DpError {
    #[error("partial data has {got} entries, bound is {bound}")]
    SizeBoundViolated { got: usize, bound: usize },
    #[error("component {0} has more unknown leaves than the problem allows")]
    TooManyUnknowns(u64),
    #[error("component {owner} has no unknown leaf {leaf}")]
    NotAdjacent { owner: u64, leaf: u64 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("malformed input: {0}")]
    Malformed(String),
}

/// Values of a max-plus semiring: `max` is the sum, `+` the product.
pub trait MaxPlus: Clone {
    fn neg_inf() -> Self;
    fn constant(v: Value) -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn max_with(&self, other: &Self) -> Self;

    fn zero() -> Self {
        Self::constant(0)
    }

    fn plus_const(&self, v: Value) -> Self {
        self.plus(&Self::constant(v))
    }
}

impl MaxPlus for Value {
    fn neg_inf() -> Self {
        NEG_INF
    }

    fn constant(v: Value) -> Self {
        v
    }

    fn plus(&self, other: &Self) -> Self {
        madd(*self, *other)
    }

    fn max_with(&self, other: &Self) -> Self {
        (*self).max(*other)
    }
}

/// Largest state alphabet a polylog problem may use.
pub const MAX_STATES: usize = 3;
/// Marker for "this leaf's value is not used by the term".
pub const BOT: usize = MAX_STATES;
const BASE: usize = MAX_STATES + 1;
/// Entries of a two-leaf table.
pub const SYM_ENTRIES: usize = BASE * BASE;

/// A max-plus polynomial in the state values of up to two unknown leaves:
/// entry `(a, b)` is the coefficient of `x0[a] + x1[b]`, where `BOT` means the
/// leaf does not occur in the term.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sym(pub [Value; SYM_ENTRIES]);

impl Sym {
    pub fn slot(a: usize, b: usize) -> usize {
        a + BASE * b
    }

    /// The variable `x_leaf[state]`.
    pub fn var(leaf: usize, state: usize) -> Sym {
        let mut t = [NEG_INF; SYM_ENTRIES];
        t[if leaf == 0 { Sym::slot(state, BOT) } else { Sym::slot(BOT, state) }] = 0;
        Sym(t)
    }

    pub fn get(&self, a: usize, b: usize) -> Value {
        self.0[Sym::slot(a, b)]
    }

    /// Value at concrete leaf state vectors (a missing leaf only admits `BOT`).
    pub fn eval(&self, leaves: &[&[Value]]) -> Value {
        let pick = |leaf: usize, s: usize| -> Value {
            if s == BOT {
                0
            } else {
                leaves.get(leaf).map_or(NEG_INF, |x| x.get(s).copied().unwrap_or(NEG_INF))
            }
        };
        let mut best = NEG_INF;
        for a in 0..BASE {
            for b in 0..BASE {
                let c = self.get(a, b);
                if c == NEG_INF {
                    continue;
                }
                best = best.max(madd(madd(c, pick(0, a)), pick(1, b)));
            }
        }
        best
    }

    pub fn is_constant(&self) -> bool {
        (0..SYM_ENTRIES).all(|i| i == Sym::slot(BOT, BOT) || self.0[i] == NEG_INF)
    }
}

impl MaxPlus for Sym {
    fn neg_inf() -> Self {
        Sym([NEG_INF; SYM_ENTRIES])
    }

    fn constant(v: Value) -> Self {
        let mut t = [NEG_INF; SYM_ENTRIES];
        t[Sym::slot(BOT, BOT)] = v;
        Sym(t)
    }

    fn plus(&self, other: &Self) -> Self {
        let mut out = [NEG_INF; SYM_ENTRIES];
        for a1 in 0..BASE {
            for b1 in 0..BASE {
                let x = self.get(a1, b1);
                if x == NEG_INF {
                    continue;
                }
                for a2 in 0..BASE {
                    if a1 != BOT && a2 != BOT {
                        continue;
                    }
                    for b2 in 0..BASE {
                        if b1 != BOT && b2 != BOT {
                            continue;
                        }
                        let y = other.get(a2, b2);
                        if y == NEG_INF {
                            continue;
                        }
                        let s = Sym::slot(a1.min(a2), b1.min(b2));
                        out[s] = out[s].max(madd(x, y));
                    }
                }
            }
        }
        Sym(out)
    }

    fn max_with(&self, other: &Self) -> Self {
        let mut out = self.0;
        for (o, &v) in out.iter_mut().zip(other.0.iter()) {
            *o = (*o).max(v);
        }
        Sym(out)
    }
}

/// A polylog problem: per-vertex state vector from the children's vectors.
pub trait NodeRule: Sync {
    fn name(&self) -> &'static str;
    /// Number of states per vertex, at most [`MAX_STATES`].
    fn states(&self) -> usize;
    /// States of a vertex given its children, each with its edge data.
    fn node<A: MaxPlus>(&self, aux: bool, kids: &[(ChildRef, Vec<A>)]) -> Vec<A>;
    /// Answer from the root's state vector.
    fn answer(&self, root: &[Value]) -> Value;
}

/// Compressed data of a subtree with at most two unknown leaves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialData {
    /// Root vertex of the subtree.
    pub owner: u64,
    /// Unknown leaf indexes; slot `i` of the tables refers to `unknowns[i]`.
    pub unknowns: Vec<u64>,
    /// One table per state of the owner.
    pub payload: Vec<Sym>,
}

impl PartialData {
    /// Table coordinates that can be finite: states of present leaves or `BOT`.
    fn coords(&self) -> Vec<(usize, usize)> {
        let s = self.payload.len();
        let axis = |leaf: usize| -> Vec<usize> {
            if leaf < self.unknowns.len() {
                (0..s).chain([BOT]).collect()
            } else {
                vec![BOT]
            }
        };
        let (xa, xb) = (axis(0), axis(1));
        xb.iter().flat_map(|&b| xa.iter().map(move |&a| (a, b))).collect()
    }

    pub fn words(&self) -> usize {
        3 + self.unknowns.len() + self.payload.len() * self.coords().len()
    }

    pub fn encode(&self, out: &mut Vec<Word>) {
        out.push(self.owner);
        out.push(self.unknowns.len() as Word);
        out.extend_from_slice(&self.unknowns);
        out.push(self.payload.len() as Word);
        let coords = self.coords();
        for t in &self.payload {
            out.extend(coords.iter().map(|&(a, b)| t.get(a, b) as Word));
        }
    }

    pub fn decode(w: &[Word]) -> (PartialData, usize) {
        let owner = w[0];
        let k = w[1] as usize;
        let unknowns = w[2..2 + k].to_vec();
        let s = w[2 + k] as usize;
        let mut pd = PartialData { owner, unknowns, payload: vec![Sym::neg_inf(); s] };
        let coords = pd.coords();
        let mut at = 3 + k;
        for t in pd.payload.iter_mut() {
            for &(a, b) in &coords {
                t.0[Sym::slot(a, b)] = w[at] as Value;
                at += 1;
            }
        }
        (pd, at)
    }

    /// Concrete state vector, given the state vectors of the unknown leaves.
    pub fn evaluate(&self, leaves: &[&[Value]]) -> Vec<Value> {
        self.payload.iter().map(|t| t.eval(leaves)).collect()
    }
}

/// Run `rule` bottom-up over the records of one connected vertex set.
/// Children outside the set are unknown leaves unless `known` gives their
/// state vector. Records must include the set's root (the one whose parent is
/// outside the set or absent).
pub fn compress_component<R: NodeRule>(
    rule: &R,
    records: &[BRec],
    known: &HashMap<u64, Vec<Value>>,
) -> Result<PartialData, DpError> {
    let by_index: HashMap<u64, &BRec> = records.iter().map(|r| (r.index, r)).collect();
    let root = records
        .iter()
        .find(|r| r.parent.is_none_or(|p| !by_index.contains_key(&p)))
        .ok_or_else(|| DpError::Malformed("vertex set has no root".into()))?;
    let mut unknowns: Vec<u64> = records
        .iter()
        .flat_map(|r| r.children.iter())
        .filter(|c| !by_index.contains_key(&c.index) && !known.contains_key(&c.index))
        .map(|c| c.index)
        .collect();
    unknowns.sort_unstable();
    if unknowns.len() > 2 {
        return Err(DpError::TooManyUnknowns(root.index));
    }
    // Iterative postorder inside the set.
    let mut order = Vec::with_capacity(records.len());
    let mut stack = vec![root.index];
    while let Some(v) = stack.pop() {
        order.push(v);
        for c in &by_index[&v].children {
            if by_index.contains_key(&c.index) {
                stack.push(c.index);
            }
        }
    }
    let mut vals: HashMap<u64, Vec<Sym>> = HashMap::with_capacity(records.len());
    for &v in order.iter().rev() {
        let r = by_index[&v];
        let kids: Vec<(ChildRef, Vec<Sym>)> = r
            .children
            .iter()
            .map(|c| {
                let x = if let Some(x) = vals.remove(&c.index) {
                    x
                } else if let Some(k) = known.get(&c.index) {
                    k.iter().map(|&v| Sym::constant(v)).collect()
                } else {
                    let slot = unknowns.iter().position(|&u| u == c.index).expect("unknown leaf");
                    (0..rule.states()).map(|s| Sym::var(slot, s)).collect()
                };
                (*c, x)
            })
            .collect();
        vals.insert(v, rule.node(r.aux, &kids));
    }
    let payload = vals.remove(&root.index).expect("root evaluated");
    let pd = PartialData { owner: root.index, unknowns, payload };
    let bound = rule.states() * SYM_ENTRIES;
    if pd.payload.len() * SYM_ENTRIES > bound {
        return Err(DpError::SizeBoundViolated { got: pd.payload.len() * SYM_ENTRIES, bound });
    }
    Ok(pd)
}

/// Substitute `lower` (rooted at one of `upper`'s unknown leaves) into `upper`.
pub fn merge_partial(upper: &PartialData, lower: &PartialData) -> Result<PartialData, DpError> {
    let slot = upper
        .unknowns
        .iter()
        .position(|&u| u == lower.owner)
        .ok_or(DpError::NotAdjacent { owner: upper.owner, leaf: lower.owner })?;
    let other: Vec<u64> = upper.unknowns.iter().copied().filter(|&u| u != lower.owner).collect();
    let mut unknowns: Vec<u64> = other.iter().chain(lower.unknowns.iter()).copied().collect();
    unknowns.sort_unstable();
    if unknowns.len() > 2 {
        return Err(DpError::SizeBoundViolated { got: unknowns.len(), bound: 2 });
    }
    let pos = |u: u64| unknowns.iter().position(|&x| x == u).expect("listed");
    let other_slot = other.first().map(|&u| (1 - slot, pos(u)));
    let lower_slots: Vec<usize> = lower.unknowns.iter().map(|&u| pos(u)).collect();
    let place = |assign: &mut [usize; 2], from: Option<(usize, usize)>, state_of: &dyn Fn(usize) -> usize| {
        if let Some((src, dst)) = from {
            assign[dst] = state_of(src);
        }
    };
    let payload = upper
        .payload
        .iter()
        .map(|table| {
            let mut out = [NEG_INF; SYM_ENTRIES];
            for a in 0..BASE {
                for b in 0..BASE {
                    let c = table.get(a, b);
                    if c == NEG_INF {
                        continue;
                    }
                    let st = [a, b];
                    let mut assign = [BOT, BOT];
                    place(&mut assign, other_slot, &|src| st[src]);
                    let s = st[slot];
                    if s == BOT {
                        let i = Sym::slot(assign[0], assign[1]);
                        out[i] = out[i].max(c);
                        continue;
                    }
                    let lt = &lower.payload[s];
                    for la in 0..BASE {
                        for lb in 0..BASE {
                            let d = lt.get(la, lb);
                            if d == NEG_INF {
                                continue;
                            }
                            let mut full = assign;
                            let ls = [la, lb];
                            for (k, &dst) in lower_slots.iter().enumerate() {
                                full[dst] = ls[k];
                            }
                            let i = Sym::slot(full[0], full[1]);
                            out[i] = out[i].max(madd(c, d));
                        }
                    }
                }
            }
            Sym(out)
        })
        .collect();
    Ok(PartialData { owner: upper.owner, unknowns, payload })
}

/// Evaluate a rule sequentially over a whole tree given as records.
pub fn solve_records<R: NodeRule>(rule: &R, records: &[BRec]) -> Result<Value, DpError> {
    let by_index: HashMap<u64, &BRec> = records.iter().map(|r| (r.index, r)).collect();
    let root = records
        .iter()
        .find(|r| r.parent.is_none())
        .ok_or_else(|| DpError::Malformed("no root".into()))?;
    let mut order = Vec::with_capacity(records.len());
    let mut stack = vec![root.index];
    while let Some(v) = stack.pop() {
        order.push(v);
        stack.extend(by_index[&v].children.iter().map(|c| c.index));
    }
    let mut vals: HashMap<u64, Vec<Value>> = HashMap::with_capacity(records.len());
    for &v in order.iter().rev() {
        let r = by_index[&v];
        let kids: Vec<(ChildRef, Vec<Value>)> =
            r.children.iter().map(|c| (*c, vals.remove(&c.index).expect("child first"))).collect();
        vals.insert(v, rule.node(r.aux, &kids));
    }
    Ok(rule.answer(&vals[&root.index]))
}

/// How candidates for one output element are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduction {
    Min,
    Max,
}

impl Reduction {
    /// The value no candidate has yet improved.
    pub fn identity(self) -> Value {
        match self {
            Reduction::Min => INF,
            Reduction::Max => NEG_INF,
        }
    }

    pub fn apply(self, a: Value, b: Value) -> Value {
        match self {
            Reduction::Min => a.min(b),
            Reduction::Max => a.max(b),
        }
    }
}

/// Pairwise merge of two vectors in which each element pair yields at most
/// one candidate for one output element.
pub trait PairRule: Sync {
    fn left_len(&self) -> usize;
    fn right_len(&self) -> usize;
    fn output_len(&self) -> usize;
    fn reduction(&self) -> Reduction;
    /// Candidate of left element `x` (value `a`) with right element `y` (value `b`).
    fn combine(&self, x: usize, a: Value, y: usize, b: Value) -> Option<(usize, Value)>;
}

/// Single-machine merge: every pair, reduced per output element.
pub fn merge_vectors<P: PairRule>(rule: &P, a: &[Value], b: &[Value]) -> Vec<Value> {
    let red = rule.reduction();
    let mut out = vec![red.identity(); rule.output_len()];
    for (x, &av) in a.iter().enumerate() {
        if av == red.identity() {
            continue;
        }
        for (y, &bv) in b.iter().enumerate() {
            if let Some((i, v)) = rule.combine(x, av, y, bv) {
                out[i] = red.apply(out[i], v);
            }
        }
    }
    out
}

/// Candidates of one chunk pair, at most one per output element.
/// `a` starts at absolute index `a_off`, `b` at `b_off`.
pub fn sub_unify<P: PairRule>(rule: &P, a_off: usize, a: &[Value], b_off: usize, b: &[Value]) -> Vec<(usize, Value)> {
    let red = rule.reduction();
    let mut best: BTreeMap<usize, Value> = BTreeMap::new();
    for (i, &av) in a.iter().enumerate() {
        if av == red.identity() {
            continue;
        }
        for (j, &bv) in b.iter().enumerate() {
            if let Some((o, v)) = rule.combine(a_off + i, av, b_off + j, bv) {
                best.entry(o).and_modify(|w| *w = red.apply(*w, v)).or_insert(v);
            }
        }
    }
    best.into_iter().collect()
}

/// Reduce candidates into an output vector of length `len`.
pub fn unify(reduction: Reduction, len: usize, candidates: impl IntoIterator<Item = (usize, Value)>) -> Vec<Value> {
    let mut out = vec![reduction.identity(); len];
    for (i, v) in candidates {
        out[i] = reduction.apply(out[i], v);
    }
    out
}

/// `k` consecutive chunks of `0..len` of nearly equal size (some may be empty).
pub fn even_chunks(len: usize, k: usize) -> Vec<Range<usize>> {
    let size = len.div_ceil(k.max(1)).max(1);
    (0..k).map(|i| (i * size).min(len)..((i + 1) * size).min(len)).collect()
}

/// Chunks from sorted cut points inside `0..len`.
pub fn chunks_from_cuts(len: usize, cuts: &[usize]) -> Vec<Range<usize>> {
    let mut bounds = vec![0];
    bounds.extend(cuts.iter().map(|&c| c.min(len)));
    bounds.push(len);
    bounds.windows(2).map(|w| w[0]..w[1].max(w[0])).collect()
}

/// `ceil(sqrt(m))`.
pub fn chunk_count(machines: usize) -> usize {
    let mut k = 1;
    while k * k < machines {
        k += 1;
    }
    k
}

/// Machine of chunk pair `(i, j)` for a merge with offset `off`.
pub fn pair_machine(i: usize, j: usize, k: usize, off: usize, machines: usize) -> usize {
    (i * k + j + off) % machines
}

/// Statistics of one distributed merge.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MergeStats {
    /// Largest number of candidates received by one output element.
    pub max_fan_in: usize,
}

#[derive(Debug, Default)]
struct MergeMachine {
    a: Vec<(usize, Value)>,
    b: Vec<(usize, Value)>,
    out: Vec<(usize, Value)>,
    fan_in: BTreeMap<usize, usize>,
}

impl Resident for MergeMachine {
    fn resident_words(&self) -> usize {
        2 * (self.a.len() + self.b.len() + self.out.len() + self.fan_in.len())
    }
}

/// Merge two vectors on the cluster. Chunk `i` of `a` and chunk `j` of `b`
/// meet on machine `i*k + j` (mod m); candidates are routed to the machine
/// hashed from their output index and reduced there. Three rounds: ship
/// chunks, sub-unify, unify. With `chunks` unset both vectors are cut into
/// `ceil(sqrt m)` even chunks.
pub fn distributed_merge<P: PairRule>(
    rule: &P,
    a: &[Value],
    b: &[Value],
    config: &ClusterConfig,
    chunks: Option<(Vec<Range<usize>>, Vec<Range<usize>>)>,
) -> Result<(Vec<Value>, Metrics, MergeStats), DpError> {
    let m = config.machines;
    let k = chunk_count(m);
    let (ca, cb) = chunks.unwrap_or_else(|| (even_chunks(a.len(), k), even_chunks(b.len(), k)));
    if ca.len() != k || cb.len() != k {
        return Err(DpError::Malformed(format!("expected {k} chunks per side")));
    }
    let h: HashFn = machine_hash(config.seed ^ 0x6d_6572_6765, INDEX_DOMAIN, m);
    // Chunk i of each side starts on machine i.
    let mut states: Vec<MergeMachine> = (0..m).map(|_| MergeMachine::default()).collect();
    for (i, r) in ca.iter().enumerate() {
        states[i % m].a.extend(r.clone().map(|x| (x, a[x])));
    }
    for (j, r) in cb.iter().enumerate() {
        states[j % m].b.extend(r.clone().map(|y| (y, b[y])));
    }
    let chunk_of = |ranges: &[Range<usize>], x: usize| ranges.iter().position(|r| r.contains(&x)).expect("covered");
    let red = rule.reduction();
    let out_len = rule.output_len();
    let mut cluster = Cluster::new(config.clone(), states)?;
    const A: Word = 1;
    const B: Word = 2;
    const CAND: Word = 3;
    for round in 0..3 {
        cluster.round(|ctx, st, inbox, out| {
            let mut mail = Mailer::new(ctx.machines);
            match round {
                0 => {
                    for &(x, v) in &st.a {
                        let i = chunk_of(&ca, x);
                        for j in 0..k {
                            mail.push(pair_machine(i, j, k, 0, ctx.machines), &[A, i as Word, j as Word, x as Word, v as Word]);
                        }
                    }
                    for &(y, v) in &st.b {
                        let j = chunk_of(&cb, y);
                        for i in 0..k {
                            mail.push(pair_machine(i, j, k, 0, ctx.machines), &[B, i as Word, j as Word, y as Word, v as Word]);
                        }
                    }
                    st.a.clear();
                    st.b.clear();
                }
                1 => {
                    let mut pairs: BTreeMap<(Word, Word), (Vec<(usize, Value)>, Vec<(usize, Value)>)> = BTreeMap::new();
                    for f in inbox_frames(inbox) {
                        let e = pairs.entry((f[1], f[2])).or_default();
                        let item = (f[3] as usize, f[4] as Value);
                        if f[0] == A {
                            e.0.push(item);
                        } else {
                            e.1.push(item);
                        }
                    }
                    for (_, (mut pa, mut pb)) in pairs {
                        pa.sort_unstable();
                        pb.sort_unstable();
                        let (Some(&(a0, _)), Some(&(b0, _))) = (pa.first(), pb.first()) else { continue };
                        let av: Vec<Value> = pa.iter().map(|p| p.1).collect();
                        let bv: Vec<Value> = pb.iter().map(|p| p.1).collect();
                        for (o, v) in sub_unify(rule, a0, &av, b0, &bv) {
                            mail.push(h.eval_unchecked(o as u64), &[CAND, o as Word, v as Word]);
                        }
                    }
                }
                _ => {
                    let mut acc: BTreeMap<usize, Value> = BTreeMap::new();
                    for f in inbox_frames(inbox) {
                        if f[0] == CAND {
                            let o = f[1] as usize;
                            *st.fan_in.entry(o).or_default() += 1;
                            let v = f[2] as Value;
                            acc.entry(o).and_modify(|w| *w = red.apply(*w, v)).or_insert(v);
                        }
                    }
                    st.out = acc.into_iter().collect();
                }
            }
            mail.flush(out);
        })?;
    }
    let (states, metrics) = cluster.into_parts();
    let stats = MergeStats {
        max_fan_in: states.iter().flat_map(|s| s.fan_in.values().copied()).max().unwrap_or(0),
    };
    let result = unify(red, out_len, states.into_iter().flat_map(|s| s.out));
    Ok((result, metrics, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Plain (min,+) convolution of two vectors.
    struct Conv {
        la: usize,
        lb: usize,
    }

    impl PairRule for Conv {
        fn left_len(&self) -> usize {
            self.la
        }
        fn right_len(&self) -> usize {
            self.lb
        }
        fn output_len(&self) -> usize {
            self.la + self.lb - 1
        }
        fn reduction(&self) -> Reduction {
            Reduction::Min
        }
        fn combine(&self, x: usize, a: Value, y: usize, b: Value) -> Option<(usize, Value)> {
            Some((x + y, crate::value::sadd(a, b)))
        }
    }

    fn cfg(m: usize) -> ClusterConfig {
        ClusterConfig::new(m, 1 << 16, 3).unwrap()
    }

    #[test]
    fn sym_plus_respects_leaf_disjointness() {
        let x = Sym::var(0, 1);
        let sq = x.plus(&x);
        assert_eq!(sq, Sym::neg_inf());
        let y = Sym::var(1, 0).plus_const(4);
        let s = x.plus(&y);
        assert_eq!(s.get(1, 0), 4);
        assert_eq!(s.eval(&[&[0, 10], &[5, 0]]), 19);
    }

    #[test]
    fn sym_constant_eval() {
        assert_eq!(Sym::constant(7).eval(&[]), 7);
        assert!(Sym::constant(7).is_constant());
        assert!(!Sym::var(0, 0).is_constant());
    }

    #[test]
    fn partial_data_round_trip() {
        let mut t = Sym::var(0, 1).plus(&Sym::var(1, 0)).max_with(&Sym::constant(3));
        t.0[Sym::slot(2, BOT)] = 9;
        let pd = PartialData { owner: 4, unknowns: vec![7, 9], payload: vec![t.clone(), Sym::constant(1), t] };
        let mut w = vec![];
        pd.encode(&mut w);
        assert_eq!(w.len(), pd.words());
        assert_eq!(w.len(), 3 + 2 + 3 * 16);
        let (back, used) = PartialData::decode(&w);
        assert_eq!(used, w.len());
        assert_eq!(back, pd);
        let one = PartialData { owner: 1, unknowns: vec![2], payload: vec![Sym::var(0, 0), Sym::constant(0)] };
        let mut w = vec![];
        one.encode(&mut w);
        assert_eq!(w.len(), 3 + 1 + 2 * 3);
        assert_eq!(PartialData::decode(&w).0, one);
    }

    #[test]
    fn chunking_helpers() {
        assert_eq!(chunk_count(1), 1);
        assert_eq!(chunk_count(16), 4);
        assert_eq!(chunk_count(17), 5);
        assert_eq!(even_chunks(10, 4), vec![0..3, 3..6, 6..9, 9..10]);
        assert_eq!(even_chunks(2, 4), vec![0..1, 1..2, 2..2, 2..2]);
        assert_eq!(chunks_from_cuts(6, &[0, 4, 4]), vec![0..0, 0..4, 4..4, 4..6]);
    }

    #[test]
    fn all_infinite_chunk_gives_no_candidates() {
        let rule = Conv { la: 3, lb: 3 };
        assert!(sub_unify(&rule, 0, &[INF, INF, INF], 0, &[1, 2, 3]).is_empty());
    }

    #[test]
    fn distributed_equals_sequential_convolution() {
        let a = vec![3, 1, INF, 4, 1, 5];
        let b = vec![9, 2, 6, 5];
        let rule = Conv { la: a.len(), lb: b.len() };
        let want = merge_vectors(&rule, &a, &b);
        let (got, metrics, stats) = distributed_merge(&rule, &a, &b, &cfg(4), None).unwrap();
        assert_eq!(got, want);
        assert_eq!(metrics.rounds, 3);
        assert!(stats.max_fan_in <= 4);
    }

    proptest! {
        #[test]
        fn chunking_invariance(
            a in proptest::collection::vec(0i64..100, 1..30),
            b in proptest::collection::vec(0i64..100, 1..30),
            cuts_a in proptest::collection::vec(0usize..30, 3),
            cuts_b in proptest::collection::vec(0usize..30, 3),
        ) {
            let rule = Conv { la: a.len(), lb: b.len() };
            let want = merge_vectors(&rule, &a, &b);
            let mut ca = cuts_a.clone();
            ca.sort_unstable();
            let mut cb = cuts_b.clone();
            cb.sort_unstable();
            let chunks = (chunks_from_cuts(a.len(), &ca), chunks_from_cuts(b.len(), &cb));
            let (got, _, stats) = distributed_merge(&rule, &a, &b, &cfg(16), Some(chunks)).unwrap();
            prop_assert_eq!(got, want);
            prop_assert!(stats.max_fan_in <= 16);
        }
    }
}
