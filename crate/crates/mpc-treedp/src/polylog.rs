//! Problems with constant-size state per vertex: maximum weight matching,
//! maximum independent set, minimum vertex cover, longest path and minimum
//! dominating set.
//!
//! All five are written as max-plus node rules on the binary extension.
//! Minimisation problems negate their costs. Auxiliary vertices either relay
//! the status of their nearest original ancestor or contribute nothing, so
//! the answer on the extension is the answer on the input tree.

use std::collections::HashMap;

use thiserror::Error;

use crate::binary_ext::{binary_extension, tree_records, BinaryExtError, ChildRef};
use crate::decomposition::{decompose_distributed_then, DecompError};
use crate::dp::{compress_component, solve_records, DpError, MaxPlus, NodeRule, PartialData, Sym, BOT};
use crate::sim::{inbox_frames, Cluster, ClusterConfig, Metrics, Resident, SimError};
use crate::tree::{Tree, TreeError};
use crate::value::{Value, NEG_INF};

#[derive(Debug, Error)]
pub enum PolylogError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Extension(#[from] BinaryExtError),
    #[error(transparent)]
    Decomposition(#[from] DecompError),
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("unknown problem {0:?}")]
    UnknownProblem(String),
}

impl PolylogError {
    pub fn sim(&self) -> Option<&SimError> {
        match self {
            PolylogError::Sim(e)
            | PolylogError::Extension(BinaryExtError::Sim(e))
            | PolylogError::Decomposition(DecompError::Sim(e))
            | PolylogError::Dp(DpError::Sim(e)) => Some(e),
            _ => None,
        }
    }
}

fn sum_all<A: MaxPlus>(xs: impl IntoIterator<Item = A>) -> A {
    xs.into_iter().fold(A::zero(), |acc, x| acc.plus(&x))
}

fn max_all<A: MaxPlus>(xs: impl IntoIterator<Item = A>) -> A {
    xs.into_iter().fold(A::neg_inf(), |acc, x| acc.max_with(&x))
}

/// Max over `i` of `pick(i) + sum_{j != i} rest(j)`.
fn one_special<A: MaxPlus>(n: usize, pick: impl Fn(usize) -> A, rest: impl Fn(usize) -> A) -> A {
    max_all((0..n).map(|i| {
        let others = sum_all((0..n).filter(|&j| j != i).map(&rest));
        pick(i).plus(&others)
    }))
}

/// Maximum weight matching. States: `C` (matched to a child), `C'` (not).
#[derive(Clone, Copy, Debug, Default)]
pub struct Matching;

impl Matching {
    const C: usize = 0;
    const C1: usize = 1;

    fn chosen<A: MaxPlus>(kid: &(ChildRef, Vec<A>)) -> A {
        let (c, x) = kid;
        if c.aux {
            x[Self::C].clone()
        } else {
            x[Self::C1].plus_const(c.weight)
        }
    }

    fn unchosen<A: MaxPlus>(kid: &(ChildRef, Vec<A>)) -> A {
        let (c, x) = kid;
        if c.aux {
            x[Self::C1].clone()
        } else {
            x[Self::C].max_with(&x[Self::C1])
        }
    }
}

impl NodeRule for Matching {
    fn name(&self) -> &'static str {
        "matching"
    }

    fn states(&self) -> usize {
        2
    }

    fn node<A: MaxPlus>(&self, _aux: bool, kids: &[(ChildRef, Vec<A>)]) -> Vec<A> {
        let c = one_special(kids.len(), |i| Self::chosen(&kids[i]), |j| Self::unchosen(&kids[j]));
        let c1 = sum_all(kids.iter().map(Self::unchosen));
        vec![c, c1]
    }

    fn answer(&self, root: &[Value]) -> Value {
        root[Self::C].max(root[Self::C1])
    }
}

/// One matching step on concrete values: children as (aux, edge weight, (C, C')).
pub fn matching_node_update(kids: &[(bool, Value, (Value, Value))]) -> (Value, Value) {
    let kids: Vec<(ChildRef, Vec<Value>)> = kids
        .iter()
        .enumerate()
        .map(|(i, &(aux, w, (c, c1)))| (ChildRef { index: i as u64, weight: if aux { 0 } else { w }, aux }, vec![c, c1]))
        .collect();
    let out = Matching.node(false, &kids);
    (out[0], out[1])
}

/// The two matching tables of a component: `f` for `C(r)` and `f'` for
/// `C'(r)`, each indexed by `(a0, a1, a2, a3)` selecting which of
/// `C(u1), C'(u1), C(u2), C'(u2)` occur in a term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchingTable {
    pub f: [Value; 16],
    pub f1: [Value; 16],
}

impl MatchingTable {
    pub fn from_partial(pd: &PartialData) -> MatchingTable {
        let conv = |t: &Sym| {
            let mut out = [NEG_INF; 16];
            for (bits, o) in out.iter_mut().enumerate() {
                let leaf = |b0: usize, b1: usize| -> Option<usize> {
                    match (bits >> b0 & 1, bits >> b1 & 1) {
                        (0, 0) => Some(BOT),
                        (1, 0) => Some(Matching::C),
                        (0, 1) => Some(Matching::C1),
                        _ => None,
                    }
                };
                if let (Some(a), Some(b)) = (leaf(0, 1), leaf(2, 3)) {
                    *o = t.get(a, b);
                }
            }
            out
        };
        MatchingTable { f: conv(&pd.payload[0]), f1: conv(&pd.payload[1]) }
    }

    /// `(C(r), C'(r))` at concrete leaf values.
    pub fn eval(&self, u1: (Value, Value), u2: (Value, Value)) -> (Value, Value) {
        let xs = [u1.0, u1.1, u2.0, u2.1];
        let at = |t: &[Value; 16]| {
            let mut best = NEG_INF;
            for (bits, &c) in t.iter().enumerate() {
                if c == NEG_INF {
                    continue;
                }
                let v = (0..4).filter(|i| bits >> i & 1 == 1).fold(c, |acc, i| crate::value::madd(acc, xs[i]));
                best = best.max(v);
            }
            best
        };
        (at(&self.f), at(&self.f1))
    }
}

/// Maximum independent set over original vertices. States: `in`, `out`;
/// an auxiliary vertex carries its original ancestor's state.
#[derive(Clone, Copy, Debug, Default)]
pub struct IndependentSet;

impl NodeRule for IndependentSet {
    fn name(&self) -> &'static str {
        "mis"
    }

    fn states(&self) -> usize {
        2
    }

    fn node<A: MaxPlus>(&self, aux: bool, kids: &[(ChildRef, Vec<A>)]) -> Vec<A> {
        let inn = sum_all(kids.iter().map(|(c, x)| if c.aux { x[0].clone() } else { x[1].clone() }));
        let out = sum_all(kids.iter().map(|(c, x)| if c.aux { x[1].clone() } else { x[0].max_with(&x[1]) }));
        vec![if aux { inn } else { inn.plus_const(1) }, out]
    }

    fn answer(&self, root: &[Value]) -> Value {
        root[0].max(root[1])
    }
}

/// Minimum vertex cover, as negated cost.
#[derive(Clone, Copy, Debug, Default)]
pub struct VertexCover;

impl NodeRule for VertexCover {
    fn name(&self) -> &'static str {
        "vc"
    }

    fn states(&self) -> usize {
        2
    }

    fn node<A: MaxPlus>(&self, aux: bool, kids: &[(ChildRef, Vec<A>)]) -> Vec<A> {
        let inn = sum_all(kids.iter().map(|(c, x)| if c.aux { x[0].clone() } else { x[0].max_with(&x[1]) }));
        let out = sum_all(kids.iter().map(|(c, x)| if c.aux { x[1].clone() } else { x[0].clone() }));
        vec![if aux { inn } else { inn.plus_const(-1) }, out]
    }

    fn answer(&self, root: &[Value]) -> Value {
        -root[0].max(root[1])
    }
}

/// Longest path by edge weight. States: best path inside the subtree, best
/// path going down from the vertex.
#[derive(Clone, Copy, Debug, Default)]
pub struct LongestPath;

impl NodeRule for LongestPath {
    fn name(&self) -> &'static str {
        "longest-path"
    }

    fn states(&self) -> usize {
        2
    }

    fn node<A: MaxPlus>(&self, _aux: bool, kids: &[(ChildRef, Vec<A>)]) -> Vec<A> {
        let arm = |k: &(ChildRef, Vec<A>)| k.1[1].plus_const(k.0.weight);
        let down = max_all(std::iter::once(A::zero()).chain(kids.iter().map(arm)));
        let mut best = max_all(kids.iter().map(|k| k.1[0].clone())).max_with(&down);
        for i in 0..kids.len() {
            for j in i + 1..kids.len() {
                best = best.max_with(&arm(&kids[i]).plus(&arm(&kids[j])));
            }
        }
        vec![best, down]
    }

    fn answer(&self, root: &[Value]) -> Value {
        root[0]
    }
}

/// Minimum dominating set, as negated cost. States: `in`, `dom` (out and
/// dominated from below), `free` (out, not yet dominated).
#[derive(Clone, Copy, Debug, Default)]
pub struct DominatingSet;

impl DominatingSet {
    const IN: usize = 0;
    const DOM: usize = 1;
    const FREE: usize = 2;

    /// Option of a child that dominates its parent.
    fn dominating<A: MaxPlus>(k: &(ChildRef, Vec<A>)) -> A {
        if k.0.aux {
            k.1[Self::DOM].clone()
        } else {
            k.1[Self::IN].clone()
        }
    }

    /// Option of a child that does not.
    fn passive<A: MaxPlus>(k: &(ChildRef, Vec<A>)) -> A {
        if k.0.aux {
            k.1[Self::FREE].clone()
        } else {
            k.1[Self::DOM].clone()
        }
    }
}

impl NodeRule for DominatingSet {
    fn name(&self) -> &'static str {
        "dominating-set"
    }

    fn states(&self) -> usize {
        3
    }

    fn node<A: MaxPlus>(&self, aux: bool, kids: &[(ChildRef, Vec<A>)]) -> Vec<A> {
        let inn = sum_all(kids.iter().map(|k| {
            if k.0.aux {
                k.1[Self::IN].clone()
            } else {
                max_all(k.1.iter().cloned())
            }
        }));
        let inn = if aux { inn } else { inn.plus_const(-1) };
        let any = |k: &(ChildRef, Vec<A>)| Self::dominating(k).max_with(&Self::passive(k));
        let dom = one_special(kids.len(), |i| Self::dominating(&kids[i]), |j| any(&kids[j]));
        let free = sum_all(kids.iter().map(Self::passive));
        vec![inn, dom, free]
    }

    fn answer(&self, root: &[Value]) -> Value {
        -root[Self::IN].max(root[Self::DOM])
    }
}

/// The registered problems of this module.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolylogProblem {
    Matching,
    IndependentSet,
    VertexCover,
    LongestPath,
    DominatingSet,
}

impl PolylogProblem {
    pub const ALL: [PolylogProblem; 5] = [
        PolylogProblem::Matching,
        PolylogProblem::IndependentSet,
        PolylogProblem::VertexCover,
        PolylogProblem::LongestPath,
        PolylogProblem::DominatingSet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolylogProblem::Matching => "matching",
            PolylogProblem::IndependentSet => "mis",
            PolylogProblem::VertexCover => "vc",
            PolylogProblem::LongestPath => "longest-path",
            PolylogProblem::DominatingSet => "dominating-set",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Whether the answer is in units of edge weight (to be divided by the scale).
    pub fn weighted(self) -> bool {
        matches!(self, PolylogProblem::Matching | PolylogProblem::LongestPath)
    }

    pub fn solve(self, tree: &Tree, config: &ClusterConfig) -> Result<PolylogReport, PolylogError> {
        match self {
            PolylogProblem::Matching => solve_polylog(&Matching, tree, config),
            PolylogProblem::IndependentSet => solve_polylog(&IndependentSet, tree, config),
            PolylogProblem::VertexCover => solve_polylog(&VertexCover, tree, config),
            PolylogProblem::LongestPath => solve_polylog(&LongestPath, tree, config),
            PolylogProblem::DominatingSet => solve_polylog(&DominatingSet, tree, config),
        }
    }

    /// Single-machine evaluation of the same rule on the given tree.
    pub fn solve_sequential(self, tree: &Tree) -> Result<Value, PolylogError> {
        let (w, _) = tree.scaled_weights()?;
        let recs = tree_records(tree, &w);
        Ok(match self {
            PolylogProblem::Matching => solve_records(&Matching, &recs)?,
            PolylogProblem::IndependentSet => solve_records(&IndependentSet, &recs)?,
            PolylogProblem::VertexCover => solve_records(&VertexCover, &recs)?,
            PolylogProblem::LongestPath => solve_records(&LongestPath, &recs)?,
            PolylogProblem::DominatingSet => solve_records(&DominatingSet, &recs)?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct PolylogReport {
    /// Answer in scaled integer units.
    pub answer: Value,
    /// Weight scale: the true answer of a weighted problem is `answer / scale`.
    pub scale: i64,
    pub metrics: Metrics,
    pub extension_size: usize,
    pub components: usize,
    pub iterations: usize,
}

/// Marker frame for a component that could not be compressed.
const FAILED: u64 = u64::MAX;

#[derive(Debug, Default)]
struct FinishMachine {
    answer: Option<Value>,
    error: Option<DpError>,
}

impl Resident for FinishMachine {
    fn resident_words(&self) -> usize {
        usize::from(self.answer.is_some())
    }
}

/// Evaluate compressed components leaf to root. Each entry is
/// (parent component, data); unknown leaves are child component roots.
pub fn evaluate_partials<R: NodeRule>(rule: &R, partials: &[(Option<u64>, PartialData)]) -> Result<Value, DpError> {
    let by_owner: HashMap<u64, &PartialData> = partials.iter().map(|(_, p)| (p.owner, p)).collect();
    let root = partials
        .iter()
        .find(|(parent, _)| parent.is_none())
        .map(|(_, p)| p.owner)
        .ok_or_else(|| DpError::Malformed("no root component".into()))?;
    let mut order = Vec::with_capacity(partials.len());
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        order.push(v);
        let pd = by_owner.get(&v).ok_or_else(|| DpError::Malformed(format!("missing component {v}")))?;
        stack.extend(pd.unknowns.iter().copied());
    }
    let mut vals: HashMap<u64, Vec<Value>> = HashMap::new();
    for &v in order.iter().rev() {
        let pd = by_owner[&v];
        let leaves: Vec<Vec<Value>> = pd.unknowns.iter().map(|u| vals.remove(u).expect("child first")).collect();
        let refs: Vec<&[Value]> = leaves.iter().map(Vec::as_slice).collect();
        vals.insert(v, pd.evaluate(&refs));
    }
    Ok(rule.answer(&vals[&root]))
}

/// Binary extension, decomposition, per-component compression, then one
/// machine evaluates the compressed component tree.
pub fn solve_polylog<R: NodeRule>(rule: &R, tree: &Tree, config: &ClusterConfig) -> Result<PolylogReport, PolylogError> {
    let (weights, scale) = tree.scaled_weights()?;
    let tb = binary_extension(tree, &weights, config)?;
    let extension_size = tb.len();
    // Every machine compresses its components in the round the decomposition
    // finishes and ships the results to machine 0.
    let dd = decompose_distributed_then(&tb, config, |_, comps, mail| {
        for c in comps.values() {
            let frame = match compress_component(rule, &c.records, &HashMap::new()) {
                Ok(pd) => {
                    let mut f = vec![c.parent.map_or(0, |p| p + 1)];
                    pd.encode(&mut f);
                    f
                }
                Err(_) => vec![FAILED, c.id],
            };
            mail.push(0, &frame);
        }
    })?;
    let mut metrics = tb.metrics.clone();
    metrics.extend(&dd.metrics);
    let components = dd.component_count();
    let iterations = dd.iterations;
    let states: Vec<FinishMachine> = (0..config.machines).map(|_| FinishMachine::default()).collect();
    let mut cluster = Cluster::resume(config.clone(), states, dd.pending)?;
    cluster.round(|ctx, st, inbox, _| {
        if ctx.machine != 0 {
            return;
        }
        let mut partials = Vec::new();
        for f in inbox_frames(inbox) {
            if f[0] == FAILED {
                st.error = Some(DpError::TooManyUnknowns(f[1]));
                return;
            }
            partials.push((f[0].checked_sub(1), PartialData::decode(&f[1..]).0));
        }
        match evaluate_partials(rule, &partials) {
            Ok(v) => st.answer = Some(v),
            Err(e) => st.error = Some(e),
        }
    })?;
    if let Some(e) = cluster.states().iter().find_map(|s| s.error.clone()) {
        return Err(e.into());
    }
    let (states, m2) = cluster.into_parts();
    metrics.extend(&m2);
    let answer = states[0].answer.ok_or_else(|| DpError::Malformed("no answer".into()))?;
    Ok(PolylogReport { answer, scale, metrics, extension_size, components, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binary_ext::{binary_extension_seq, with_integer_weights, BRec};
    use crate::dp::merge_partial;
    use crate::tree::{gen_tree, TreeKind, WeightDist};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn path(weights: &[i64]) -> Tree {
        let parents: Vec<u64> = (0..=weights.len() as u64).collect();
        let t = Tree::from_parents(&parents, None).unwrap();
        let mut w = vec![0];
        w.extend_from_slice(weights);
        with_integer_weights(&t, &w)
    }

    fn star(n: usize) -> Tree {
        let parents: Vec<u64> = (0..n).map(|i| if i == 0 { 0 } else { 1 }).collect();
        Tree::from_parents(&parents, None).unwrap()
    }

    fn seq(p: PolylogProblem, t: &Tree) -> Value {
        p.solve_sequential(t).unwrap()
    }

    #[test]
    fn matching_leaf_and_one_child() {
        assert_eq!(matching_node_update(&[]), (NEG_INF, 0));
        assert_eq!(matching_node_update(&[(false, 5, (NEG_INF, 0))]), (5, 0));
    }

    #[test]
    fn hand_checked_answers() {
        assert_eq!(seq(PolylogProblem::Matching, &path(&[5, 1, 5])), 10);
        assert_eq!(seq(PolylogProblem::IndependentSet, &path(&[1, 1, 1])), 2);
        assert_eq!(seq(PolylogProblem::VertexCover, &star(5)), 1);
        let fb = gen_tree(TreeKind::FullBinary, 7, 0, WeightDist::None);
        assert_eq!(seq(PolylogProblem::LongestPath, &fb), 4);
        assert_eq!(seq(PolylogProblem::DominatingSet, &path(&[1, 1, 1, 1, 1, 1])), 3);
        let single = Tree::from_parents(&[0], None).unwrap();
        assert_eq!(seq(PolylogProblem::Matching, &single), 0);
        assert_eq!(seq(PolylogProblem::DominatingSet, &single), 1);
    }

    #[test]
    fn matching_table_degenerates_without_unknowns() {
        let t = path(&[2, 7, 3]);
        let (w, _) = t.scaled_weights().unwrap();
        let recs = tree_records(&t, &w);
        let pd = compress_component(&Matching, &recs, &HashMap::new()).unwrap();
        let mt = MatchingTable::from_partial(&pd);
        assert_eq!(mt.eval((0, 0), (0, 0)), (5, 7));
        assert!(mt.f.iter().enumerate().all(|(i, &v)| i == 0 || v == NEG_INF));
    }

    fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Tree {
        let kind = TreeKind::ALL[rng.gen_range(0..TreeKind::ALL.len())];
        gen_tree(kind, n, rng.gen(), WeightDist::Uniform { lo: 1, hi: 20 })
    }

    /// Records of `t` with a random connected vertex set: returns (set, rest).
    fn random_cut(rng: &mut ChaCha8Rng, recs: &[BRec]) -> (Vec<BRec>, u64) {
        let top = recs[rng.gen_range(0..recs.len())].index;
        let by: HashMap<u64, &BRec> = recs.iter().map(|r| (r.index, r)).collect();
        let mut set = vec![];
        let mut stack = vec![top];
        while let Some(v) = stack.pop() {
            set.push(by[&v].clone());
            for c in &by[&v].children {
                if set.len() + stack.len() < 6 || rng.gen_bool(0.6) {
                    stack.push(c.index);
                }
            }
        }
        (set, top)
    }

    #[test]
    fn table_semantics_match_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 100 {
            let t = random_tree(&mut rng, 12);
            let (tb, _) = binary_extension_seq(&t, 2, rng.gen()).unwrap();
            let (w, _) = tb.scaled_weights().unwrap();
            let recs = tree_records(&tb, &w);
            let (set, _) = random_cut(&mut rng, &recs);
            let Ok(pd) = compress_component(&DominatingSet, &set, &HashMap::new()) else { continue };
            let leaves: Vec<Vec<Value>> =
                pd.unknowns.iter().map(|_| (0..3).map(|_| rng.gen_range(-5..5)).collect()).collect();
            let known: HashMap<u64, Vec<Value>> = pd.unknowns.iter().copied().zip(leaves.iter().cloned()).collect();
            let direct = compress_component(&DominatingSet, &set, &known).unwrap();
            let refs: Vec<&[Value]> = leaves.iter().map(Vec::as_slice).collect();
            let concrete: Vec<Value> = direct.payload.iter().map(|t| t.eval(&[])).collect();
            assert_eq!(pd.evaluate(&refs), concrete);
            checked += 1;
        }
    }

    #[test]
    fn distributed_equals_sequential_all_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in TreeKind::ALL {
            let t = gen_tree(kind, 300, rng.gen(), WeightDist::Uniform { lo: 1, hi: 50 });
            let cfg = ClusterConfig::polylog(t.len(), 4, 8.0, rng.gen()).unwrap();
            for p in PolylogProblem::ALL {
                let got = p.solve(&t, &cfg).unwrap();
                assert_eq!(got.answer, seq(p, &t), "{} on {}", p.name(), kind.name());
            }
        }
    }

    #[test]
    fn auxiliary_vertices_are_invisible() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..40 {
            let t = random_tree(&mut rng, 40);
            let (tb, _) = binary_extension_seq(&t, 4, rng.gen()).unwrap();
            for p in PolylogProblem::ALL {
                assert_eq!(seq(p, &t), seq(p, &tb), "{}", p.name());
            }
        }
    }

    #[test]
    fn star_matching_is_heaviest_edge() {
        let t = gen_tree(TreeKind::Star, 500, 3, WeightDist::Uniform { lo: 1, hi: 1000 });
        let (w, _) = t.scaled_weights().unwrap();
        let cfg = ClusterConfig::polylog(t.len(), 8, 8.0, 1).unwrap();
        let got = PolylogProblem::Matching.solve(&t, &cfg).unwrap();
        assert_eq!(got.answer, *w.iter().max().unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn merge_equals_compress_of_union(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_tree(&mut rng, 12);
            let (tb, _) = binary_extension_seq(&t, 2, rng.gen()).unwrap();
            let (w, _) = tb.scaled_weights().unwrap();
            let recs = tree_records(&tb, &w);
            let (upper, _) = random_cut(&mut rng, &recs);
            let inside: std::collections::HashSet<u64> = upper.iter().map(|r| r.index).collect();
            let outs: Vec<u64> = upper.iter().flat_map(|r| r.children.iter()).map(|c| c.index).filter(|i| !inside.contains(i)).collect();
            prop_assume!(!outs.is_empty());
            let by: HashMap<u64, &BRec> = recs.iter().map(|r| (r.index, r)).collect();
            let lower_root = outs[rng.gen_range(0..outs.len())];
            let mut lower = vec![];
            let mut stack = vec![lower_root];
            while let Some(v) = stack.pop() {
                lower.push(by[&v].clone());
                for c in &by[&v].children {
                    if rng.gen_bool(0.7) {
                        stack.push(c.index);
                    }
                }
            }
            let none = HashMap::new();
            let (Ok(a), Ok(b)) = (compress_component(&Matching, &upper, &none), compress_component(&Matching, &lower, &none)) else {
                return Ok(());
            };
            let union: Vec<BRec> = upper.iter().chain(lower.iter()).cloned().collect();
            match (merge_partial(&a, &b), compress_component(&Matching, &union, &none)) {
                (Ok(m), Ok(u)) => prop_assert_eq!(m, u),
                (Err(_), Err(_)) => {}
                (x, y) => prop_assert!(false, "{:?} vs {:?}", x.is_ok(), y.is_ok()),
            }
        }
    }
}
