//! Randomized decomposition of a binary tree into connected components.
//!
//! Every vertex starts as its own component. Each iteration selects the root
//! component, components with two child components, components whose parent is
//! completed, and one-child components by a fair coin. Every other incomplete
//! component merges into its closest selected ancestor. A component reaching
//! `ceil(n/m)` vertices is completed and never grows again. The loop stops
//! once at most `14m` components remain.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::binary_ext::{BRec, DistBinary};
use crate::khash::{stream_rng, HashFn};
use crate::sim::{ceil_log2, inbox_frames, Cluster, ClusterConfig, Mailer, Message, Metrics, Resident, SimError, StepCtx, Word};
use crate::tree::Tree;

const COIN_SALT: u64 = 0x2c4f_8e61_b0d3_7a95;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecompError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("no termination after {iterations} iterations")]
    NonTermination { iterations: usize },
    #[error("closest selected ancestor more than {limit} components away")]
    AncestorTooFar { limit: usize },
    #[error("input has a vertex with {0} children")]
    NotBinary(usize),
    #[error("invalid decomposition: {0}")]
    Invalid(String),
}

/// The coin of component `id` in iteration `iteration`.
pub fn coin(seed: u64, id: u64, iteration: usize) -> bool {
    let mut rng: ChaCha8Rng = stream_rng(seed.wrapping_add(COIN_SALT), id);
    rng.set_word_pos(iteration as u128 * 16);
    rng.gen::<bool>()
}

/// Number of components on the way to the selected ancestor that forwarding
/// resolves before giving up: `2 ceil(log2 n)` rounded up to a power of two.
pub fn hop_limit(n: usize) -> usize {
    let cap = (2 * ceil_log2(n) as usize).max(1);
    1 << ceil_log2(cap)
}

/// Component count at which the loop stops.
pub fn stop_count(m: usize) -> usize {
    14 * m
}

pub fn iteration_ceiling(n: usize) -> usize {
    8 * ceil_log2(n) as usize + 16
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    /// Index of the component's root vertex.
    pub id: u64,
    /// Vertex indexes, ascending.
    pub vertices: Vec<u64>,
    pub parent: Option<u64>,
    /// Child component ids, ascending.
    pub children: Vec<u64>,
    pub completed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// The outer vertex is the parent of the inner one.
    Up,
    /// The outer vertex is a child of the inner one.
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OuterEdge {
    pub inner: u64,
    pub outer: u64,
    pub direction: Direction,
}

/// A partition of the vertices of a binary tree into components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    components: BTreeMap<u64, Component>,
    comp_of: HashMap<u64, u64>,
}

/// What one iteration did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IterationStats {
    pub iteration: usize,
    pub components_before: usize,
    /// Incomplete components at the start of the iteration.
    pub active_before: usize,
    pub selected: usize,
    /// Largest number of component-tree edges from a merged component to its target.
    pub max_hops: usize,
    pub components_after: usize,
    pub completed_after: usize,
    pub max_size_after: usize,
}

impl Decomposition {
    /// Every vertex in its own component.
    pub fn singletons(tb: &Tree) -> Result<Self, DecompError> {
        let mut components = BTreeMap::new();
        let mut comp_of = HashMap::with_capacity(tb.len());
        for p in 0..tb.len() {
            let k = tb.children(p).len();
            if k > 2 {
                return Err(DecompError::NotBinary(k));
            }
            let id = tb.index(p);
            let mut children: Vec<u64> = tb.children(p).iter().map(|&c| tb.index(c)).collect();
            children.sort_unstable();
            components.insert(
                id,
                Component {
                    id,
                    vertices: vec![id],
                    parent: tb.parent(p).map(|q| tb.index(q)),
                    children,
                    completed: false,
                },
            );
            comp_of.insert(id, id);
        }
        Ok(Decomposition { components, comp_of })
    }

    /// Build from components; `comp_of` is derived.
    pub fn from_components<I: IntoIterator<Item = Component>>(comps: I) -> Self {
        let mut components = BTreeMap::new();
        let mut comp_of = HashMap::new();
        for c in comps {
            for &v in &c.vertices {
                comp_of.insert(v, c.id);
            }
            components.insert(c.id, c);
        }
        Decomposition { components, comp_of }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> impl Iterator<Item = &Component> {
        self.components.values()
    }

    pub fn component(&self, id: u64) -> Option<&Component> {
        self.components.get(&id)
    }

    pub fn component_of(&self, vertex: u64) -> Option<u64> {
        self.comp_of.get(&vertex).copied()
    }

    pub fn completed_count(&self) -> usize {
        self.components.values().filter(|c| c.completed).count()
    }

    pub fn max_size(&self) -> usize {
        self.components.values().map(|c| c.vertices.len()).max().unwrap_or(0)
    }

    /// The selected set of one iteration, from the state at its start.
    pub fn select(&self, seed: u64, iteration: usize) -> BTreeSet<u64> {
        self.components
            .values()
            .filter(|c| !c.completed)
            .filter(|c| match c.parent {
                None => true,
                Some(p) => {
                    c.children.len() == 2
                        || self.components[&p].completed
                        || (c.children.len() == 1 && coin(seed, c.id, iteration))
                }
            })
            .map(|c| c.id)
            .collect()
    }

    /// Merge every incomplete unselected component into its closest selected
    /// ancestor. Returns the largest hop count to a target.
    pub fn merge_step(&mut self, selected: &BTreeSet<u64>) -> Result<usize, DecompError> {
        let mut target: HashMap<u64, (u64, usize)> = HashMap::new();
        let ids: Vec<u64> = self.components.keys().copied().collect();
        for &id in &ids {
            let c = &self.components[&id];
            if c.completed || selected.contains(&id) {
                continue;
            }
            let mut hops = 0;
            let mut cur = id;
            let t = loop {
                let p = self.components[&cur].parent.ok_or_else(|| {
                    DecompError::Invalid(format!("unselected component {cur} has no parent"))
                })?;
                hops += 1;
                if selected.contains(&p) {
                    break p;
                }
                if self.components[&p].completed {
                    return Err(DecompError::Invalid(format!("component {cur} would merge into completed {p}")));
                }
                cur = p;
            };
            target.insert(id, (t, hops));
        }
        let max_hops = target.values().map(|t| t.1).max().unwrap_or(0);
        // Absorb members in id order so vertex lists stay deterministic.
        let mut members: Vec<(u64, u64)> = target.iter().map(|(&c, &(t, _))| (c, t)).collect();
        members.sort_unstable();
        let mut absorbed: HashMap<u64, Vec<Component>> = HashMap::new();
        for (c, t) in members {
            let comp = self.components.remove(&c).expect("member exists");
            absorbed.entry(t).or_default().push(comp);
        }
        for (t, comps) in absorbed {
            let mut new_children: Vec<u64> = Vec::new();
            let mut verts = std::mem::take(&mut self.components.get_mut(&t).expect("target").vertices);
            let own_children = self.components[&t].children.clone();
            new_children.extend(own_children.into_iter().filter(|ch| !target.contains_key(ch)));
            for comp in comps {
                for &v in &comp.vertices {
                    self.comp_of.insert(v, t);
                }
                verts.extend_from_slice(&comp.vertices);
                for ch in comp.children {
                    if !target.contains_key(&ch) {
                        new_children.push(ch);
                        self.components.get_mut(&ch).expect("child").parent = Some(t);
                    }
                }
            }
            verts.sort_unstable();
            new_children.sort_unstable();
            let tc = self.components.get_mut(&t).expect("target");
            tc.vertices = verts;
            tc.children = new_children;
        }
        Ok(max_hops)
    }

    /// Mark incomplete components with at least `threshold` vertices completed.
    pub fn complete(&mut self, threshold: usize) {
        for c in self.components.values_mut() {
            if !c.completed && c.vertices.len() >= threshold {
                c.completed = true;
            }
        }
    }

    /// Edges of `tb` leaving component `id`.
    pub fn outer_edges(&self, tb: &Tree, id: u64) -> Vec<OuterEdge> {
        let c = &self.components[&id];
        let mut out = Vec::new();
        for &v in &c.vertices {
            let p = tb.position(v).expect("vertex of tb");
            if let Some(q) = tb.parent(p) {
                let qi = tb.index(q);
                if self.comp_of[&qi] != id {
                    out.push(OuterEdge { inner: v, outer: qi, direction: Direction::Up });
                }
            }
            for &ch in tb.children(p) {
                let ci = tb.index(ch);
                if self.comp_of[&ci] != id {
                    out.push(OuterEdge { inner: v, outer: ci, direction: Direction::Down });
                }
            }
        }
        out
    }

    /// Exact structural check against the tree: partition, connectivity,
    /// unique component root equal to the id, parent/child links consistent
    /// with tree edges, and at most two child components.
    pub fn check(&self, tb: &Tree) -> Result<(), DecompError> {
        let bad = |s: String| Err(DecompError::Invalid(s));
        let mut seen = 0usize;
        for c in self.components.values() {
            seen += c.vertices.len();
            let mut roots = Vec::new();
            for &v in &c.vertices {
                if self.comp_of.get(&v) != Some(&c.id) {
                    return bad(format!("vertex {v} listed in {} but mapped elsewhere", c.id));
                }
                let p = tb.position(v).ok_or_else(|| DecompError::Invalid(format!("unknown vertex {v}")))?;
                match tb.parent(p) {
                    Some(q) if self.comp_of.get(&tb.index(q)) == Some(&c.id) => {}
                    Some(q) => {
                        roots.push(v);
                        let pc = self.comp_of[&tb.index(q)];
                        if c.parent != Some(pc) {
                            return bad(format!("component {} has parent {:?}, tree says {pc}", c.id, c.parent));
                        }
                    }
                    None => {
                        roots.push(v);
                        if c.parent.is_some() {
                            return bad(format!("root component {} has a parent", c.id));
                        }
                    }
                }
            }
            // One vertex with its parent outside means the vertex set is connected.
            if roots != [c.id] {
                return bad(format!("component {} has roots {roots:?}", c.id));
            }
            let mut kids: Vec<u64> = self
                .outer_edges(tb, c.id)
                .into_iter()
                .filter(|e| e.direction == Direction::Down)
                .map(|e| e.outer)
                .collect();
            kids.sort_unstable();
            if kids != c.children {
                return bad(format!("component {} lists children {:?}, tree says {kids:?}", c.id, c.children));
            }
            if kids.len() > 2 {
                return bad(format!("component {} has {} child components", c.id, kids.len()));
            }
        }
        if seen != tb.len() || self.comp_of.len() != tb.len() {
            return bad(format!("{seen} vertices in components, tree has {}", tb.len()));
        }
        Ok(())
    }

    /// One line per component: `id: vertices | outer edges`, where `a>b`
    /// leads down to `b` and `a<b` leads up to `b`.
    pub fn dump(&self, tb: &Tree) -> String {
        let mut s = String::new();
        for c in self.components.values() {
            let vs: Vec<String> = c.vertices.iter().map(u64::to_string).collect();
            let es: Vec<String> = self
                .outer_edges(tb, c.id)
                .iter()
                .map(|e| match e.direction {
                    Direction::Up => format!("{}<{}", e.inner, e.outer),
                    Direction::Down => format!("{}>{}", e.inner, e.outer),
                })
                .collect();
            let _ = writeln!(s, "{}: {} | {}", c.id, vs.join(" "), es.join(" "));
        }
        s
    }
}

/// A component-tree node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CtNode {
    pub id: u64,
    pub parent: Option<u64>,
    pub children: Vec<u64>,
    pub size: usize,
}

/// The decomposition with each component contracted to a node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentTree {
    pub root: u64,
    pub nodes: BTreeMap<u64, CtNode>,
}

impl ComponentTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edges(&self) -> Vec<(u64, u64)> {
        self.nodes
            .values()
            .flat_map(|n| n.children.iter().map(move |&c| (n.id, c)))
            .collect()
    }

    /// Node ids in an order where children precede their parent.
    pub fn postorder(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![(self.root, false)];
        while let Some((v, done)) = stack.pop() {
            if done {
                out.push(v);
                continue;
            }
            stack.push((v, true));
            for &c in self.nodes[&v].children.iter().rev() {
                stack.push((c, false));
            }
        }
        out
    }
}

pub fn contract(d: &Decomposition) -> ComponentTree {
    let nodes: BTreeMap<u64, CtNode> = d
        .components()
        .map(|c| {
            (
                c.id,
                CtNode { id: c.id, parent: c.parent, children: c.children.clone(), size: c.vertices.len() },
            )
        })
        .collect();
    let root = nodes.values().find(|n| n.parent.is_none()).map_or(0, |n| n.id);
    ComponentTree { root, nodes }
}

#[derive(Clone, Debug)]
pub struct DecompOutcome {
    pub decomposition: Decomposition,
    pub tree: ComponentTree,
    pub iterations: usize,
    pub stats: Vec<IterationStats>,
}

/// Sequential decomposition with `m` machines' worth of target components.
/// `observer` sees the statistics and the state after every iteration.
pub fn decompose_observed<F>(tb: &Tree, m: usize, seed: u64, mut observer: F) -> Result<DecompOutcome, DecompError>
where
    F: FnMut(&IterationStats, &Decomposition),
{
    let n = tb.len();
    let threshold = n.div_ceil(m).max(1);
    let limit = hop_limit(n);
    let mut d = Decomposition::singletons(tb)?;
    let mut stats = Vec::new();
    let mut iteration = 0;
    while d.len() > stop_count(m) {
        if iteration >= iteration_ceiling(n) {
            return Err(DecompError::NonTermination { iterations: iteration });
        }
        let components_before = d.len();
        let active_before = d.len() - d.completed_count();
        let selected = d.select(seed, iteration);
        let max_hops = d.merge_step(&selected)?;
        if max_hops > limit {
            return Err(DecompError::AncestorTooFar { limit });
        }
        d.complete(threshold);
        let st = IterationStats {
            iteration,
            components_before,
            active_before,
            selected: selected.len(),
            max_hops,
            components_after: d.len(),
            completed_after: d.completed_count(),
            max_size_after: d.max_size(),
        };
        observer(&st, &d);
        stats.push(st);
        iteration += 1;
    }
    let tree = contract(&d);
    Ok(DecompOutcome { decomposition: d, tree, iterations: iteration, stats })
}

pub fn decompose(tb: &Tree, m: usize, seed: u64) -> Result<DecompOutcome, DecompError> {
    decompose_observed(tb, m, seed, |_, _| {})
}

/// A component as held by its machine `h(id)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistComponent {
    pub id: u64,
    /// Vertex records, ascending by index.
    pub records: Vec<BRec>,
    pub parent: Option<u64>,
    pub children: Vec<u64>,
    pub completed: bool,
    pub parent_completed: bool,
}

impl DistComponent {
    pub fn words(&self) -> usize {
        4 + self.children.len() + self.records.iter().map(BRec::words).sum::<usize>()
    }

    pub fn to_component(&self) -> Component {
        Component {
            id: self.id,
            vertices: self.records.iter().map(|r| r.index).collect(),
            parent: self.parent,
            children: self.children.clone(),
            completed: self.completed,
        }
    }
}

/// An unselected component while its target is being found.
#[derive(Clone, Copy, Debug, Default)]
struct ChainNode {
    up: u64,
    down: u64,
    target: u64,
    announced: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
enum Phase {
    #[default]
    Select,
    Resolve,
    Forward,
    Done,
}

mod tag {
    pub const COUNT: u64 = 1;
    pub const STATUS_UP: u64 = 2;
    pub const STATUS_DOWN: u64 = 3;
    pub const PTR: u64 = 4;
    pub const DOWN: u64 = 5;
    pub const REC: u64 = 6;
    pub const NEW_PARENT: u64 = 7;
    pub const UNRESOLVED: u64 = 8;
    pub const NOTIFY: u64 = 9;
}

#[derive(Debug, Default)]
struct DecMachine {
    phase: Phase,
    iteration: usize,
    step: usize,
    n: usize,
    comps: BTreeMap<u64, DistComponent>,
    selected: BTreeSet<u64>,
    /// Per component: children that reported unselected.
    unselected_children: HashMap<u64, Vec<u64>>,
    chain: BTreeMap<u64, ChainNode>,
    /// Records received for targets: (target, member id, member records, member's outside children).
    absorbed: Vec<(u64, u64, Vec<BRec>, Vec<u64>)>,
    error: Option<DecompError>,
}

impl Resident for DecMachine {
    fn resident_words(&self) -> usize {
        self.comps.values().map(DistComponent::words).sum::<usize>()
            + self.selected.len()
            + self.unselected_children.values().map(|v| 1 + v.len()).sum::<usize>()
            + 4 * self.chain.len()
            + self
                .absorbed
                .iter()
                .map(|a| 2 + a.3.len() + a.2.iter().map(BRec::words).sum::<usize>())
                .sum::<usize>()
    }
}

/// Output of the distributed decomposition: components on machine `h(id)`.
#[derive(Clone, Debug)]
pub struct DistDecomp {
    pub hash: HashFn,
    pub shards: Vec<BTreeMap<u64, DistComponent>>,
    pub iterations: usize,
    pub metrics: Metrics,
    /// Messages sent by the finishing step, due in the next round.
    pub pending: Vec<Vec<Message>>,
}

impl DistDecomp {
    pub fn to_decomposition(&self) -> Decomposition {
        Decomposition::from_components(self.shards.iter().flat_map(|s| s.values().map(DistComponent::to_component)))
    }

    pub fn component_count(&self) -> usize {
        self.shards.iter().map(BTreeMap::len).sum()
    }
}

struct Ctx<'a> {
    h: &'a HashFn,
    m: usize,
    seed: u64,
    mail: Mailer,
}

impl Ctx<'_> {
    fn to(&mut self, id: u64, frame: &[Word]) {
        let dest = self.h.eval_unchecked(id);
        self.mail.push(dest, frame);
    }
}

fn select_and_announce(st: &mut DecMachine, cx: &mut Ctx) {
    st.selected.clear();
    st.unselected_children.clear();
    for c in st.comps.values() {
        if c.completed {
            continue;
        }
        let sel = match c.parent {
            None => true,
            Some(_) => {
                c.children.len() == 2 || c.parent_completed || (c.children.len() == 1 && coin(cx.seed, c.id, st.iteration))
            }
        };
        if sel {
            st.selected.insert(c.id);
        }
        if let Some(p) = c.parent {
            cx.to(p, &[tag::STATUS_UP, p, c.id, sel as u64]);
        }
        for &ch in &c.children {
            cx.to(ch, &[tag::STATUS_DOWN, ch, sel as u64]);
        }
    }
}

/// Doubling messages of every chain node, plus the record hand-off of nodes
/// that learned their target since the last round.
fn forward(st: &mut DecMachine, cx: &mut Ctx) {
    for (&id, node) in st.chain.iter_mut() {
        if node.down != 0 {
            cx.to(node.down, &[tag::PTR, node.down, node.up, node.target]);
        }
        if node.target == 0 {
            cx.to(node.up, &[tag::DOWN, node.up, node.down]);
        }
        if node.target != 0 && !node.announced {
            node.announced = true;
            let comp = st.comps.remove(&id).expect("chain node is a live component");
            let members = st.unselected_children.get(&id).cloned().unwrap_or_default();
            let outside: Vec<u64> = comp.children.iter().copied().filter(|c| !members.contains(c)).collect();
            for &ch in &outside {
                cx.to(ch, &[tag::NEW_PARENT, ch, node.target]);
            }
            let mut frame = vec![tag::REC, node.target, id, outside.len() as u64];
            frame.extend_from_slice(&outside);
            for r in &comp.records {
                r.encode(&mut frame);
            }
            cx.to(node.target, &frame);
        }
    }
    let unresolved = st.chain.values().filter(|c| c.target == 0).count() as u64;
    cx.mail.push_all(&[tag::UNRESOLVED, unresolved]);
}

fn finalize(st: &mut DecMachine, cx: &mut Ctx) {
    let threshold = st.n.div_ceil(cx.m).max(1);
    let mut absorbed = std::mem::take(&mut st.absorbed);
    absorbed.sort_by_key(|a| (a.0, a.1));
    for (t, _, recs, outside) in absorbed {
        let members = st.unselected_children.get(&t).cloned().unwrap_or_default();
        let comp = st.comps.get_mut(&t).expect("target lives where its records were sent");
        comp.records.extend(recs);
        comp.children.retain(|c| !members.contains(c));
        comp.children.extend(outside);
    }
    st.chain.clear();
    let mut count = 0u64;
    for comp in st.comps.values_mut() {
        count += 1;
        comp.records.sort_by_key(|r| r.index);
        comp.children.sort_unstable();
        comp.children.dedup();
        if !comp.completed && comp.records.len() >= threshold {
            comp.completed = true;
            for &ch in &comp.children {
                let dest = cx.h.eval_unchecked(ch);
                cx.mail.push(dest, &[tag::NOTIFY, ch]);
            }
        }
    }
    cx.mail.push_all(&[tag::COUNT, count, 0]);
    st.iteration += 1;
}

/// Returns true in the round the machine learns the decomposition is done.
fn dec_step(st: &mut DecMachine, inbox: &[Message], cx: &mut Ctx) -> bool {
    if st.error.is_some() || st.phase == Phase::Done {
        return false;
    }
    let mut counts = (0u64, 0u64);
    let mut unresolved = 0u64;
    let mut saw_unresolved = false;
    for f in inbox_frames(inbox) {
        match f[0] {
            tag::COUNT => {
                counts.0 += f[1];
                counts.1 += f[2];
            }
            tag::NOTIFY => {
                if let Some(c) = st.comps.get_mut(&f[1]) {
                    c.parent_completed = true;
                }
            }
            tag::STATUS_UP => {
                if f[3] == 0 {
                    st.unselected_children.entry(f[1]).or_default().push(f[2]);
                }
            }
            tag::STATUS_DOWN => {
                // Parent selected: the chain starts here with a known target.
                let id = f[1];
                if f[2] == 1 {
                    st.chain.entry(id).or_default().target = u64::MAX;
                }
            }
            tag::PTR => {
                if let Some(node) = st.chain.get_mut(&f[1]) {
                    if node.target == 0 {
                        if f[3] != 0 {
                            node.target = f[3];
                        } else {
                            node.up = f[2];
                        }
                    }
                }
            }
            tag::DOWN => {
                if let Some(node) = st.chain.get_mut(&f[1]) {
                    node.down = f[2];
                }
            }
            tag::REC => {
                let k = f[3] as usize;
                let outside = f[4..4 + k].to_vec();
                let mut recs = Vec::new();
                let mut rest = &f[4 + k..];
                while !rest.is_empty() {
                    let (r, used) = BRec::decode(rest);
                    recs.push(r);
                    rest = &rest[used..];
                }
                st.absorbed.push((f[1], f[2], recs, outside));
            }
            tag::NEW_PARENT => {
                if let Some(c) = st.comps.get_mut(&f[1]) {
                    c.parent = Some(f[2]);
                    c.parent_completed = false;
                }
            }
            tag::UNRESOLVED => {
                saw_unresolved = true;
                unresolved += f[1];
            }
            _ => {}
        }
    }
    match st.phase {
        Phase::Select => {
            if st.iteration == 0 {
                counts.0 = st.n as u64;
            }
            if counts.0 as usize <= stop_count(cx.m) {
                st.phase = Phase::Done;
                return true;
            }
            if st.iteration >= iteration_ceiling(st.n) {
                st.error = Some(DecompError::NonTermination { iterations: st.iteration });
                return false;
            }
            // Chain entries recorded here belong to the coming iteration.
            st.chain.clear();
            select_and_announce(st, cx);
            st.phase = Phase::Resolve;
        }
        Phase::Resolve => {
            let known_selected: BTreeMap<u64, bool> =
                st.chain.iter().map(|(&id, n)| (id, n.target == u64::MAX)).collect();
            st.chain.clear();
            let ids: Vec<u64> = st.comps.keys().copied().collect();
            for id in ids {
                let c = &st.comps[&id];
                if c.completed || st.selected.contains(&id) {
                    continue;
                }
                let parent = c.parent.expect("unselected components have a parent");
                let down = st.unselected_children.get(&id).and_then(|v| v.first().copied()).unwrap_or(0);
                let parent_selected = known_selected.get(&id).copied().unwrap_or(false);
                st.chain.insert(
                    id,
                    ChainNode {
                        up: parent,
                        down,
                        target: if parent_selected { parent } else { 0 },
                        announced: false,
                    },
                );
            }
            st.step = 0;
            forward(st, cx);
            st.phase = Phase::Forward;
        }
        Phase::Forward => {
            if saw_unresolved && unresolved == 0 {
                finalize(st, cx);
                st.phase = Phase::Select;
                return false;
            }
            st.step += 1;
            let limit = hop_limit(st.n);
            if (1usize << st.step) >= limit && st.chain.values().any(|c| c.target == 0) {
                st.error = Some(DecompError::AncestorTooFar { limit });
                return false;
            }
            forward(st, cx);
        }
        Phase::Done => {}
    }
    false
}

/// Distributed decomposition of the binary extension produced on the same cluster.
pub fn decompose_distributed(tb: &DistBinary, config: &ClusterConfig) -> Result<DistDecomp, DecompError> {
    decompose_distributed_then(tb, config, |_, _, _| {})
}

/// As [`decompose_distributed`]; in the round where a machine learns the
/// decomposition is finished it also runs `finish` on its components. The
/// messages `finish` sends are returned in [`DistDecomp::pending`].
pub fn decompose_distributed_then<F>(tb: &DistBinary, config: &ClusterConfig, finish: F) -> Result<DistDecomp, DecompError>
where
    F: Fn(&StepCtx, &BTreeMap<u64, DistComponent>, &mut Mailer),
{
    let states: Vec<DecMachine> = tb
        .shards
        .iter()
        .map(|shard| DecMachine {
            n: tb.size,
            comps: shard
                .iter()
                .map(|r| {
                    (
                        r.index,
                        DistComponent {
                            id: r.index,
                            records: vec![r.clone()],
                            parent: r.parent,
                            children: r.children.iter().map(|c| c.index).collect(),
                            completed: false,
                            parent_completed: false,
                        },
                    )
                })
                .collect(),
            ..DecMachine::default()
        })
        .collect();
    let mut cluster = Cluster::new(config.clone(), states)?;
    let h = tb.hash.clone();
    let m = config.machines;
    while cluster.states()[0].phase != Phase::Done {
        cluster.round(|ctx, st, inbox, out| {
            let mut cx = Ctx { h: &h, m, seed: ctx.seed, mail: Mailer::new(ctx.machines) };
            if dec_step(st, inbox, &mut cx) {
                finish(ctx, &st.comps, &mut cx.mail);
            }
            cx.mail.flush(out);
        })?;
        if let Some(e) = cluster.states().iter().find_map(|s| s.error.clone()) {
            return Err(e);
        }
    }
    let iterations = cluster.states()[0].iteration;
    let (states, pending, metrics) = cluster.into_pending();
    Ok(DistDecomp {
        hash: h,
        shards: states.into_iter().map(|s| s.comps).collect(),
        iterations,
        metrics,
        pending,
    })
}
