//! Bounded-degree and binary extensions of a rooted tree.
//!
//! Vertices with more than `delta` children get `ceil(|C_v|/delta)` auxiliary
//! children and every original child moves under a random one of them. Then
//! every vertex with more than two children is expanded into a balanced binary
//! gadget. Original indexes are preserved; auxiliary indexes are allocated
//! above the largest input index.
//!
//! The sequential functions here define the result exactly; the distributed
//! [`binary_extension`] reproduces it on the simulator.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use thiserror::Error;

use crate::khash::{prev_power_of_two, stream_rng, universal_k, HashError, HashFn, MERSENNE_61};
use crate::sim::{inbox_frames, Cluster, ClusterConfig, Mailer, Metrics, Resident, SimError, Word};
use crate::tree::{Tree, TreeError, Vertex, Weight};

/// Keys hashed to machines are vertex indexes below this bound.
pub const INDEX_DOMAIN: u64 = 1 << 60;

/// Offset mixed into the run seed for the re-parenting choices.
const REPARENT_SALT: u64 = 0x5f3a_91c2_d4e7_0b68;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BinaryExtError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Hash(#[from] HashError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("vertex {0} of the original tree has no image")]
    MissingImage(u64),
    #[error("original index {0} was not preserved")]
    IndexChanged(u64),
    #[error("{ancestor} is an ancestor of {descendant} but their images are not")]
    AncestryBroken { ancestor: u64, descendant: u64 },
}

/// Injective map from original indexes into an extension, plus the set of
/// added (auxiliary) vertexes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtensionMap {
    forward: BTreeMap<u64, u64>,
    aux: BTreeSet<u64>,
}

impl ExtensionMap {
    pub fn identity(tree: &Tree) -> Self {
        ExtensionMap {
            forward: tree.vertices().iter().map(|v| (v.index, v.index)).collect(),
            aux: BTreeSet::new(),
        }
    }

    pub fn forward(&self, index: u64) -> Option<u64> {
        self.forward.get(&index).copied()
    }

    pub fn aux(&self) -> &BTreeSet<u64> {
        &self.aux
    }

    /// `next` applied after `self`.
    pub fn compose(&self, next: &ExtensionMap) -> ExtensionMap {
        let forward = self
            .forward
            .iter()
            .filter_map(|(&k, &v)| next.forward(v).map(|w| (k, w)))
            .collect();
        let mut aux: BTreeSet<u64> = self.aux.iter().filter_map(|&a| next.forward(a)).collect();
        aux.extend(next.aux.iter().copied());
        ExtensionMap { forward, aux }
    }

    /// Check that `ext` extends `original` under this map: indexes preserved
    /// and every ancestor pair of `original` maps to an ancestor pair.
    /// Enumerates all ancestor pairs.
    pub fn verify(&self, original: &Tree, ext: &Tree) -> Result<(), BinaryExtError> {
        let (tin, tout) = euler(ext);
        let mut image = Vec::with_capacity(original.len());
        for v in original.vertices() {
            let f = self.forward(v.index).ok_or(BinaryExtError::MissingImage(v.index))?;
            if f != v.index {
                return Err(BinaryExtError::IndexChanged(v.index));
            }
            let pos = ext.position(f).ok_or(BinaryExtError::MissingImage(v.index))?;
            if ext.is_aux(pos) {
                return Err(BinaryExtError::MissingImage(v.index));
            }
            image.push(pos);
        }
        for v in 0..original.len() {
            let mut a = original.parent(v);
            while let Some(u) = a {
                let (fu, fv) = (image[u], image[v]);
                if !(tin[fu] <= tin[fv] && tout[fv] <= tout[fu]) {
                    return Err(BinaryExtError::AncestryBroken {
                        ancestor: original.index(u),
                        descendant: original.index(v),
                    });
                }
                a = original.parent(u);
            }
        }
        Ok(())
    }
}

/// Entry and exit times of an iterative DFS.
fn euler(t: &Tree) -> (Vec<usize>, Vec<usize>) {
    let n = t.len();
    let (mut tin, mut tout) = (vec![0; n], vec![0; n]);
    let mut clock = 0;
    let mut stack = vec![(t.root(), false)];
    while let Some((v, done)) = stack.pop() {
        if done {
            tout[v] = clock;
            clock += 1;
            continue;
        }
        tin[v] = clock;
        clock += 1;
        stack.push((v, true));
        for &c in t.children(v).iter().rev() {
            stack.push((c, false));
        }
    }
    (tin, tout)
}

/// Child count of every vertex, keyed by index.
pub fn degrees(tree: &Tree) -> BTreeMap<u64, usize> {
    tree.vertices()
        .iter()
        .enumerate()
        .map(|(p, v)| (v.index, tree.children(p).len()))
        .collect()
}

fn aux_vertex(index: u64, parent: u64) -> Vertex {
    Vertex {
        index,
        parent: Some(parent),
        weight: Some(Weight::integer(0)),
        aux: true,
    }
}

/// Auxiliary slot a child moves to under a parent with `slots` auxiliaries.
fn reparent_slot(seed: u64, child: u64, slots: u64) -> u64 {
    stream_rng(seed.wrapping_add(REPARENT_SALT), child).gen_range(0..slots)
}

/// High-degree dictionary: `(v, ceil(|C_v|/delta))` for every `|C_v| > delta`.
fn high_degree(deg: &BTreeMap<u64, usize>, delta: usize) -> Vec<(u64, u64)> {
    deg.iter()
        .filter(|(_, &d)| d > delta)
        .map(|(&v, &d)| (v, d.div_ceil(delta) as u64))
        .collect()
}

/// First auxiliary index of each dictionary key, laid out in key order after `base`.
fn aux_offsets(dict: &[(u64, u64)], base: u64) -> (HashMap<u64, (u64, u64)>, u64) {
    let mut next = base;
    let mut map = HashMap::with_capacity(dict.len());
    for &(v, s) in dict {
        map.insert(v, (next + 1, s));
        next += s;
    }
    (map, next)
}

/// Bounded-degree extension with `delta` as the child-count threshold.
pub fn bound_degrees(tree: &Tree, delta: usize, seed: u64) -> Result<(Tree, ExtensionMap), BinaryExtError> {
    let delta = delta.max(1);
    let dict = high_degree(&degrees(tree), delta);
    let (offsets, _) = aux_offsets(&dict, tree.max_index());
    let mut vs = Vec::with_capacity(tree.len() + dict.len());
    let mut aux = BTreeSet::new();
    for v in tree.vertices() {
        let mut v = v.clone();
        if let Some(p) = v.parent {
            if let Some(&(first, s)) = offsets.get(&p) {
                v.parent = Some(first + reparent_slot(seed, v.index, s));
            }
        }
        vs.push(v);
    }
    for &(v, _) in &dict {
        let (first, s) = offsets[&v];
        for a in first..first + s {
            vs.push(aux_vertex(a, v));
            aux.insert(a);
        }
    }
    let mut map = ExtensionMap::identity(tree);
    map.aux = aux;
    Ok((Tree::new(vs)?, map))
}

/// Internal nodes of the balanced gadget rooted at `p` over `children`
/// (sorted), with their children. Inner nodes take indexes from `next_aux`
/// in preorder. The left half gets the extra child.
pub fn gadget(p: u64, children: &[u64], next_aux: &mut u64) -> Vec<(u64, [u64; 2])> {
    fn build(node: u64, list: &[u64], next_aux: &mut u64, out: &mut Vec<(u64, [u64; 2])>) {
        let slot = out.len();
        out.push((node, [0, 0]));
        let (l, r) = list.split_at(list.len().div_ceil(2));
        let mut kids = [0u64; 2];
        for (k, half) in [l, r].into_iter().enumerate() {
            kids[k] = if half.len() == 1 {
                half[0]
            } else {
                *next_aux += 1;
                let a = *next_aux;
                build(a, half, next_aux, out);
                a
            };
        }
        out[slot].1 = kids;
    }
    let mut out = Vec::with_capacity(children.len().saturating_sub(1));
    if children.len() > 2 {
        build(p, children, next_aux, &mut out);
    }
    out
}

/// Binary extension where gadget indexes are handed out group by group
/// (ascending `group(parent)`), and by parent index inside a group.
pub fn binarize_grouped<G>(tree: &Tree, group: G) -> Result<(Tree, ExtensionMap), BinaryExtError>
where
    G: Fn(u64) -> usize,
{
    let mut parents: Vec<usize> = (0..tree.len()).filter(|&p| tree.children(p).len() > 2).collect();
    parents.sort_by_key(|&p| (group(tree.index(p)), tree.index(p)));
    let mut next = tree.max_index();
    let mut new_parent: HashMap<u64, u64> = HashMap::new();
    let mut vs: Vec<Vertex> = Vec::new();
    let mut aux = BTreeSet::new();
    for p in parents {
        let mut kids: Vec<u64> = tree.children(p).iter().map(|&c| tree.index(c)).collect();
        kids.sort_unstable();
        for (node, ch) in gadget(tree.index(p), &kids, &mut next) {
            if node != tree.index(p) {
                aux.insert(node);
            }
            for c in ch {
                new_parent.insert(c, node);
            }
        }
    }
    // Inner nodes hang under their gadget parent, which `new_parent` recorded.
    for &a in &aux {
        vs.push(aux_vertex(a, new_parent[&a]));
    }
    for v in tree.vertices() {
        let mut v = v.clone();
        if let Some(&np) = new_parent.get(&v.index) {
            v.parent = Some(np);
        }
        vs.push(v);
    }
    let mut map = ExtensionMap::identity(tree);
    map.aux = aux;
    Ok((Tree::new(vs)?, map))
}

/// Binary extension with gadget indexes allocated in parent-index order.
pub fn binarize(tree: &Tree) -> Result<(Tree, ExtensionMap), BinaryExtError> {
    binarize_grouped(tree, |_| 0)
}

/// One child slot of a binary-extension vertex: index, edge weight, aux flag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChildRef {
    pub index: u64,
    pub weight: i64,
    pub aux: bool,
}

/// A vertex of the binary extension as stored on its machine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BRec {
    pub index: u64,
    pub parent: Option<u64>,
    /// Integer weight of the edge to the parent.
    pub weight: i64,
    pub aux: bool,
    pub children: Vec<ChildRef>,
}

impl BRec {
    pub fn words(&self) -> usize {
        5 + 3 * self.children.len()
    }

    pub fn encode(&self, out: &mut Vec<Word>) {
        out.extend_from_slice(&[
            self.index,
            self.parent.unwrap_or(0),
            self.weight as u64,
            self.aux as u64,
            self.children.len() as u64,
        ]);
        for c in &self.children {
            out.extend_from_slice(&[c.index, c.weight as u64, c.aux as u64]);
        }
    }

    /// Decode one record; returns it and the number of words consumed.
    pub fn decode(w: &[Word]) -> (BRec, usize) {
        let k = w[4] as usize;
        let children = (0..k)
            .map(|i| ChildRef {
                index: w[5 + 3 * i],
                weight: w[6 + 3 * i] as i64,
                aux: w[7 + 3 * i] != 0,
            })
            .collect();
        let rec = BRec {
            index: w[0],
            parent: (w[1] != 0).then_some(w[1]),
            weight: w[2] as i64,
            aux: w[3] != 0,
            children,
        };
        (rec, 5 + 3 * k)
    }
}

/// Records of a tree with the given per-position integer weights, ordered by index.
pub fn tree_records(tree: &Tree, weights: &[i64]) -> Vec<BRec> {
    (0..tree.len())
        .map(|p| {
            let v = tree.vertex(p);
            let mut children: Vec<ChildRef> = tree
                .children(p)
                .iter()
                .map(|&c| ChildRef {
                    index: tree.index(c),
                    weight: weights[c],
                    aux: tree.is_aux(c),
                })
                .collect();
            children.sort_by_key(|c| c.index);
            BRec {
                index: v.index,
                parent: v.parent,
                weight: if v.parent.is_some() { weights[p] } else { 0 },
                aux: v.aux,
                children,
            }
        })
        .collect()
}

/// Rebuild a tree from records (integer weights, aux flags kept).
pub fn records_tree<'a, I>(records: I) -> Result<Tree, TreeError>
where
    I: IntoIterator<Item = &'a BRec>,
{
    let vs = records
        .into_iter()
        .map(|r| Vertex {
            index: r.index,
            parent: r.parent,
            weight: r.parent.map(|_| Weight::integer(r.weight)),
            aux: r.aux,
        })
        .collect();
    Tree::new(vs)
}

/// The same tree with every edge weight replaced by the given integers.
pub fn with_integer_weights(tree: &Tree, weights: &[i64]) -> Tree {
    let vs = tree
        .vertices()
        .iter()
        .enumerate()
        .map(|(p, v)| Vertex {
            weight: v.parent.map(|_| Weight::integer(weights[p])),
            ..v.clone()
        })
        .collect();
    Tree::new(vs).expect("same shape as a valid tree")
}

mod tag {
    pub const VERTEX: u64 = 1;
    pub const COUNT: u64 = 2;
    pub const DICT: u64 = 3;
    pub const TD: u64 = 4;
    pub const AUX_COUNT: u64 = 5;
    pub const PARENT_PART: u64 = 6;
    pub const CHILD_PART: u64 = 7;
}

/// Hash shared by the tree pipeline: sampled from the run seed on machine 0.
pub fn pipeline_hash(seed: u64, machines: usize) -> HashFn {
    crate::khash::machine_hash(seed, INDEX_DOMAIN, machines)
}

fn rebuild_hash(coeffs: &[Word], machines: usize) -> Result<HashFn, HashError> {
    HashFn::from_coefficients(coeffs.to_vec(), MERSENNE_61, INDEX_DOMAIN, prev_power_of_two(machines as u64))
}

/// Per-machine state of the extension pipeline.
#[derive(Debug, Default)]
struct ExtMachine {
    /// Input placement: `(index, parent or 0, weight)`.
    input: Vec<(u64, u64, i64)>,
    hash: Option<HashFn>,
    owned: Vec<(u64, u64, i64)>,
    degree: BTreeMap<u64, u64>,
    dict: Vec<(u64, u64)>,
    /// T^d vertices whose T^d parent hashes here: `(index, parent or 0, weight, aux)`.
    td: Vec<(u64, u64, i64, bool)>,
    out: Vec<BRec>,
    /// Vertex count of the extension, known to every machine after round 5.
    size: u64,
    error: Option<HashError>,
}

impl Resident for ExtMachine {
    fn resident_words(&self) -> usize {
        3 * self.input.len()
            + self.hash.as_ref().map_or(0, |h| h.k())
            + 3 * self.owned.len()
            + 2 * self.degree.len()
            + 2 * self.dict.len()
            + 4 * self.td.len()
            + self.out.iter().map(BRec::words).sum::<usize>()
    }
}

/// Result of the distributed extension: T^b records on machine `h(index)`.
#[derive(Clone, Debug)]
pub struct DistBinary {
    pub hash: HashFn,
    pub shards: Vec<Vec<BRec>>,
    pub delta: usize,
    /// Vertex count as computed on the machines.
    pub size: usize,
    pub metrics: Metrics,
}

impl DistBinary {
    pub fn len(&self) -> usize {
        self.shards.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Gather the records into one tree (harness-side).
    pub fn to_tree(&self) -> Result<Tree, TreeError> {
        records_tree(self.shards.iter().flatten())
    }
}

/// Global facts every machine is given: the largest index and the degree threshold.
#[derive(Clone, Copy, Debug)]
struct Globals {
    n: u64,
    max_index: u64,
    delta: usize,
}

fn initial_cluster(tree: &Tree, weights: &[i64], config: &ClusterConfig) -> Result<Cluster<ExtMachine>, SimError> {
    let m = config.machines;
    let n = tree.len();
    let mut states: Vec<ExtMachine> = (0..m).map(|_| ExtMachine::default()).collect();
    for (p, v) in tree.vertices().iter().enumerate() {
        let machine = p * m / n;
        states[machine].input.push((v.index, v.parent.unwrap_or(0), weights[p]));
    }
    Cluster::new(config.clone(), states)
}

fn step(g: Globals, round: usize, ctx: &crate::sim::StepCtx, st: &mut ExtMachine, inbox: &[crate::sim::Message], mail: &mut Mailer) {
    let m = ctx.machines;
    match round {
        0 => {
            if ctx.machine == 0 {
                let h = pipeline_hash(ctx.seed, m);
                mail.push_all(h.coefficients());
            }
        }
        1 => {
            let coeffs = inbox_frames(inbox).next().unwrap_or(&[]);
            let h = match rebuild_hash(coeffs, m) {
                Ok(h) => h,
                Err(e) => {
                    st.error = Some(e);
                    return;
                }
            };
            let mut local: BTreeMap<u64, u64> = BTreeMap::new();
            for &(idx, par, w) in &st.input {
                mail.push(h.eval_unchecked(idx), &[tag::VERTEX, idx, par, w as u64]);
                if par != 0 {
                    *local.entry(par).or_default() += 1;
                }
            }
            for (par, cnt) in local {
                mail.push(h.eval_unchecked(par), &[tag::COUNT, par, cnt]);
            }
            st.input.clear();
            st.hash = Some(h);
        }
        2 => {
            for f in inbox_frames(inbox) {
                match f[0] {
                    tag::VERTEX => {
                        st.owned.push((f[1], f[2], f[3] as i64));
                        st.degree.entry(f[1]).or_default();
                    }
                    tag::COUNT => *st.degree.entry(f[1]).or_default() += f[2],
                    _ => {}
                }
            }
            st.owned.sort_unstable();
            let mut frame = vec![tag::DICT];
            for (&v, &d) in &st.degree {
                if d as usize > g.delta {
                    frame.extend_from_slice(&[v, (d as usize).div_ceil(g.delta) as u64]);
                }
            }
            if frame.len() > 1 {
                mail.push_all(&frame);
            }
        }
        3 => {
            let mut dict = Vec::new();
            for f in inbox_frames(inbox) {
                if f[0] == tag::DICT {
                    dict.extend(f[1..].chunks(2).map(|c| (c[0], c[1])));
                }
            }
            dict.sort_unstable();
            let (offsets, _) = aux_offsets(&dict, g.max_index);
            let h = st.hash.as_ref().expect("hash set in round 1");
            for &(idx, par, w) in &st.owned {
                let par_d = match offsets.get(&par) {
                    Some(&(first, s)) => first + reparent_slot(ctx.seed, idx, s),
                    None => par,
                };
                let dest = h.eval_unchecked(if par_d == 0 { idx } else { par_d });
                mail.push(dest, &[tag::TD, idx, par_d, w as u64, 0]);
                if let Some(&(first, s)) = offsets.get(&idx) {
                    for a in first..first + s {
                        mail.push(h.eval_unchecked(idx), &[tag::TD, a, idx, 0, 1]);
                    }
                }
            }
            st.owned.clear();
            st.degree.clear();
            st.dict = dict;
        }
        4 => {
            for f in inbox_frames(inbox) {
                if f[0] == tag::TD {
                    st.td.push((f[1], f[2], f[3] as i64, f[4] != 0));
                }
            }
            st.td.sort_unstable_by_key(|t| (t.1, t.0));
            let mut extra = 0u64;
            for group in st.td.chunk_by(|a, b| a.1 == b.1) {
                if group[0].1 != 0 {
                    extra += group.len().saturating_sub(2) as u64;
                }
            }
            mail.push_all(&[tag::AUX_COUNT, ctx.machine as u64, extra]);
        }
        5 => {
            let mut counts = vec![0u64; m];
            for f in inbox_frames(inbox) {
                if f[0] == tag::AUX_COUNT {
                    counts[f[1] as usize] = f[2];
                }
            }
            let total_s: u64 = st.dict.iter().map(|d| d.1).sum();
            st.size = g.n + total_s + counts.iter().sum::<u64>();
            let mut next = g.max_index + total_s + counts[..ctx.machine].iter().sum::<u64>();
            let h = st.hash.as_ref().expect("hash set in round 1");
            for group in st.td.chunk_by(|a, b| a.1 == b.1) {
                let p = group[0].1;
                if p == 0 {
                    for &(idx, _, _, aux) in group {
                        mail.push(h.eval_unchecked(idx), &[tag::PARENT_PART, idx, 0, 0, aux as u64]);
                    }
                    continue;
                }
                let info: HashMap<u64, (i64, bool)> = group.iter().map(|t| (t.0, (t.2, t.3))).collect();
                let kids: Vec<u64> = group.iter().map(|t| t.0).collect();
                let nodes = if kids.len() > 2 {
                    gadget(p, &kids, &mut next)
                } else {
                    let mut two = [0u64; 2];
                    two[..kids.len()].copy_from_slice(&kids);
                    vec![(p, two)]
                };
                for (node, ch) in &nodes {
                    let mut frame = vec![tag::CHILD_PART, *node, 0];
                    for &c in ch.iter().filter(|&&c| c != 0) {
                        let (w, aux) = info.get(&c).copied().unwrap_or((0, true));
                        frame.extend_from_slice(&[c, w as u64, aux as u64]);
                        frame[2] += 1;
                        mail.push(h.eval_unchecked(c), &[tag::PARENT_PART, c, *node, w as u64, aux as u64]);
                    }
                    mail.push(h.eval_unchecked(*node), &frame);
                }
            }
            st.td.clear();
            st.dict.clear();
        }
        6 => {
            let mut recs: BTreeMap<u64, BRec> = BTreeMap::new();
            for f in inbox_frames(inbox) {
                match f[0] {
                    tag::PARENT_PART => {
                        let r = recs.entry(f[1]).or_insert_with(|| empty_rec(f[1]));
                        r.parent = (f[2] != 0).then_some(f[2]);
                        r.weight = f[3] as i64;
                        r.aux = f[4] != 0;
                    }
                    tag::CHILD_PART => {
                        let r = recs.entry(f[1]).or_insert_with(|| empty_rec(f[1]));
                        r.children = f[3..]
                            .chunks(3)
                            .map(|c| ChildRef { index: c[0], weight: c[1] as i64, aux: c[2] != 0 })
                            .collect();
                        r.children.sort_by_key(|c| c.index);
                    }
                    _ => {}
                }
            }
            st.out = recs.into_values().collect();
        }
        _ => {}
    }
}

fn empty_rec(index: u64) -> BRec {
    BRec { index, parent: None, weight: 0, aux: false, children: Vec::new() }
}

fn run_rounds(tree: &Tree, weights: &[i64], config: &ClusterConfig, rounds: usize) -> Result<(Vec<ExtMachine>, Metrics, usize), BinaryExtError> {
    let m = config.machines;
    let g = Globals {
        n: tree.len() as u64,
        max_index: tree.max_index(),
        delta: tree.len().div_ceil(m).max(1),
    };
    let mut cluster = initial_cluster(tree, weights, config)?;
    for r in 0..rounds {
        cluster.round(|ctx, st, inbox, out| {
            let mut mail = Mailer::new(ctx.machines);
            step(g, r, ctx, st, inbox, &mut mail);
            mail.flush(out);
        })?;
        if let Some(e) = cluster.states().iter().find_map(|s| s.error.clone()) {
            return Err(e.into());
        }
    }
    let (states, metrics) = cluster.into_parts();
    Ok((states, metrics, g.delta))
}

/// Child counts computed on the cluster: the hash is broadcast, local counts go
/// to `h(parent)`, and machine `h(v)` sums them. Three rounds.
pub fn compute_degrees(tree: &Tree, config: &ClusterConfig) -> Result<(BTreeMap<u64, usize>, Metrics), BinaryExtError> {
    let weights = vec![0; tree.len()];
    let (states, metrics, _) = run_rounds(tree, &weights, config, 3)?;
    let mut out = BTreeMap::new();
    for st in &states {
        for (&v, &d) in &st.degree {
            out.insert(v, d as usize);
        }
    }
    Ok((out, metrics))
}

/// Distributed binary extension with `delta = ceil(n/m)`, in seven rounds.
/// `weights` are per-position integer edge weights.
pub fn binary_extension(tree: &Tree, weights: &[i64], config: &ClusterConfig) -> Result<DistBinary, BinaryExtError> {
    let (states, metrics, delta) = run_rounds(tree, weights, config, 7)?;
    let hash = pipeline_hash(config.seed, config.machines);
    let size = states[0].size as usize;
    let shards = states.into_iter().map(|s| s.out).collect();
    Ok(DistBinary { hash, shards, delta, size, metrics })
}

/// The sequential result the distributed pipeline reproduces exactly.
pub fn binary_extension_seq(tree: &Tree, machines: usize, seed: u64) -> Result<(Tree, ExtensionMap), BinaryExtError> {
    let delta = tree.len().div_ceil(machines).max(1);
    let (td, m1) = bound_degrees(tree, delta, seed)?;
    let h = pipeline_hash(seed, machines);
    let (tb, m2) = binarize_grouped(&td, |v| h.eval_unchecked(v))?;
    Ok((tb, m1.compose(&m2)))
}

/// k used by the pipeline hash, exposed for budget estimates.
pub fn pipeline_hash_k(machines: usize) -> usize {
    universal_k(prev_power_of_two(machines as u64))
}
