//! Rooted trees: representation, text format, generators and sharding.
//!
//! Text format: a header line with the vertex count `n`, then `n` lines
//! `index parent [weight]`. Parent `0` marks the root. A weight is the weight
//! of the edge from the vertex to its parent and may be written as an
//! integer, a finite decimal (`3.5`) or a fraction (`7/2`).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::khash::{distribute_weighted, HashFn, WeightedItem};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("index {0} appears twice")]
    DuplicateIndex(u64),
    #[error("parent {parent} of vertex {child} does not exist")]
    MissingParent { child: u64, parent: u64 },
    #[error("parent pointers contain a cycle through vertex {0}")]
    CycleDetected(u64),
    #[error("more than one root: {0} and {1}")]
    MultipleRoots(u64, u64),
    #[error("tree is empty")]
    Empty,
    #[error("index 0 is reserved for the root marker")]
    ZeroIndex,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("weights do not fit 64-bit integers after scaling")]
    WeightOverflow,
}

/// Non-negative exact rational edge weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Weight(Ratio<i64>);

impl Weight {
    pub fn integer(v: i64) -> Self {
        Weight(Ratio::from_integer(v))
    }

    pub fn new(num: i64, den: i64) -> Option<Self> {
        if den <= 0 || num < 0 {
            return None;
        }
        Some(Weight(Ratio::new(num, den)))
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n, d) = (self.numer(), self.denom());
        if d == 1 {
            return write!(f, "{n}");
        }
        // Denominators of the form 2^a 5^b have an exact decimal expansion.
        let (mut twos, mut fives, mut rest) = (0u32, 0u32, d);
        while rest % 2 == 0 {
            rest /= 2;
            twos += 1;
        }
        while rest % 5 == 0 {
            rest /= 5;
            fives += 1;
        }
        let digits = twos.max(fives);
        if rest == 1 && digits <= 18 {
            let scale = 10i128.pow(digits);
            let scaled = n as i128 * scale / d as i128;
            let int = scaled / scale;
            let frac = scaled % scale;
            write!(f, "{int}.{frac:0width$}", width = digits as usize)
        } else {
            write!(f, "{n}/{d}")
        }
    }
}

impl FromStr for Weight {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("bad weight {s:?}");
        if let Some((a, b)) = s.split_once('/') {
            let n: i64 = a.parse().map_err(|_| bad())?;
            let d: i64 = b.parse().map_err(|_| bad())?;
            if d <= 0 || n < 0 {
                return Err(bad());
            }
            return Ok(Weight(Ratio::new(n, d)));
        }
        if let Some((a, b)) = s.split_once('.') {
            if a.starts_with('-') || b.is_empty() || !b.bytes().all(|c| c.is_ascii_digit()) || b.len() > 18 {
                return Err(bad());
            }
            let int: i64 = if a.is_empty() { 0 } else { a.parse().map_err(|_| bad())? };
            let frac: i64 = b.parse().map_err(|_| bad())?;
            let den = 10i64.pow(b.len() as u32);
            let num = int.checked_mul(den).and_then(|x| x.checked_add(frac)).ok_or_else(bad)?;
            return Ok(Weight(Ratio::new(num, den)));
        }
        let n: i64 = s.parse().map_err(|_| bad())?;
        if n < 0 {
            return Err(bad());
        }
        Ok(Weight::integer(n))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    pub index: u64,
    /// `None` for the root.
    pub parent: Option<u64>,
    /// Weight of the edge to the parent.
    pub weight: Option<Weight>,
    pub aux: bool,
}

impl Vertex {
    pub fn new(index: u64, parent: Option<u64>, weight: Option<Weight>) -> Self {
        Vertex { index, parent, weight, aux: false }
    }
}

/// A rooted tree. Vertices are stored sorted by index; internal positions
/// `0..n` follow that order.
#[derive(Clone, Debug)]
pub struct Tree {
    vertices: Vec<Vertex>,
    pos: HashMap<u64, usize>,
    parent: Vec<Option<usize>>,
    child_start: Vec<usize>,
    child_list: Vec<usize>,
    root: usize,
}

impl PartialEq for Tree {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
    }
}

impl Eq for Tree {}

impl Tree {
    pub fn new(mut vertices: Vec<Vertex>) -> Result<Tree, TreeError> {
        if vertices.is_empty() {
            return Err(TreeError::Empty);
        }
        vertices.sort_by_key(|v| v.index);
        let mut pos = HashMap::with_capacity(vertices.len());
        for (i, v) in vertices.iter().enumerate() {
            if v.index == 0 {
                return Err(TreeError::ZeroIndex);
            }
            if pos.insert(v.index, i).is_some() {
                return Err(TreeError::DuplicateIndex(v.index));
            }
        }
        let n = vertices.len();
        let mut parent = vec![None; n];
        let mut root = None;
        for (i, v) in vertices.iter().enumerate() {
            match v.parent {
                None => match root {
                    None => root = Some(i),
                    Some(r) => {
                        return Err(TreeError::MultipleRoots(vertices[r].index, v.index));
                    }
                },
                Some(p) => {
                    let pi = *pos.get(&p).ok_or(TreeError::MissingParent { child: v.index, parent: p })?;
                    parent[i] = Some(pi);
                }
            }
        }
        // Every vertex must reach the root; otherwise some pointer chain cycles.
        let mut state = vec![0u8; n];
        if let Some(r) = root {
            state[r] = 2;
        }
        for start in 0..n {
            let mut path = Vec::new();
            let mut cur = start;
            while state[cur] == 0 {
                state[cur] = 1;
                path.push(cur);
                match parent[cur] {
                    Some(p) => cur = p,
                    None => break,
                }
            }
            if state[cur] == 1 {
                return Err(TreeError::CycleDetected(vertices[cur].index));
            }
            for v in path {
                state[v] = 2;
            }
        }
        let root = root.ok_or(TreeError::CycleDetected(vertices[0].index))?;
        let mut counts = vec![0usize; n + 1];
        for p in parent.iter().flatten() {
            counts[*p + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let child_start = counts.clone();
        let mut fill = counts;
        let mut child_list = vec![0usize; n.saturating_sub(1)];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                child_list[fill[p]] = i;
                fill[p] += 1;
            }
        }
        Ok(Tree { vertices, pos, parent, child_start, child_list, root })
    }

    /// Tree on labels `1..=n` from a parent array (`parents[i]` is the parent
    /// label of vertex `i+1`, 0 for the root).
    pub fn from_parents(parents: &[u64], weights: Option<&[Weight]>) -> Result<Tree, TreeError> {
        let vs = parents
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let parent = (p != 0).then_some(p);
                let weight = weights.and_then(|w| parent.map(|_| w[i]));
                Vertex::new(i as u64 + 1, parent, weight)
            })
            .collect();
        Tree::new(vs)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, pos: usize) -> &Vertex {
        &self.vertices[pos]
    }

    pub fn index(&self, pos: usize) -> u64 {
        self.vertices[pos].index
    }

    pub fn position(&self, index: u64) -> Option<usize> {
        self.pos.get(&index).copied()
    }

    pub fn parent(&self, pos: usize) -> Option<usize> {
        self.parent[pos]
    }

    pub fn children(&self, pos: usize) -> &[usize] {
        &self.child_list[self.child_start[pos]..self.child_start[pos + 1]]
    }

    pub fn is_aux(&self, pos: usize) -> bool {
        self.vertices[pos].aux
    }

    pub fn weight(&self, pos: usize) -> Option<Weight> {
        self.vertices[pos].weight
    }

    pub fn original_count(&self) -> usize {
        self.vertices.iter().filter(|v| !v.aux).count()
    }

    pub fn max_index(&self) -> u64 {
        self.vertices.last().map(|v| v.index).unwrap_or(0)
    }

    /// Positions in preorder (parents before children).
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            out.push(v);
            stack.extend(self.children(v).iter().rev());
        }
        out
    }

    /// Positions in postorder (children before parents).
    pub fn postorder(&self) -> Vec<usize> {
        let mut out = self.preorder();
        out.reverse();
        out
    }

    pub fn depths(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.len()];
        for v in self.preorder() {
            if let Some(p) = self.parent[v] {
                d[v] = d[p] + 1;
            }
        }
        d
    }

    pub fn height(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }

    pub fn max_children(&self) -> usize {
        (0..self.len()).map(|v| self.children(v).len()).max().unwrap_or(0)
    }

    /// Edge weights scaled to integers by the lcm of all denominators.
    /// Missing weights count as 1. Returns per-position weights (root gets 0)
    /// and the scale factor.
    pub fn scaled_weights(&self) -> Result<(Vec<i64>, i64), TreeError> {
        let mut scale: i64 = 1;
        for v in &self.vertices {
            if let Some(w) = v.weight {
                scale = scale.lcm(&w.denom());
                if scale > 1 << 40 {
                    return Err(TreeError::WeightOverflow);
                }
            }
        }
        let mut out = vec![0i64; self.len()];
        for (i, v) in self.vertices.iter().enumerate() {
            if v.parent.is_none() {
                continue;
            }
            out[i] = match v.weight {
                Some(w) => w
                    .numer()
                    .checked_mul(scale / w.denom())
                    .filter(|x| *x < 1 << 40)
                    .ok_or(TreeError::WeightOverflow)?,
                None => scale,
            };
        }
        Ok((out, scale))
    }

    pub fn emit(&self) -> String {
        let mut s = format!("{}\n", self.len());
        for v in &self.vertices {
            let p = v.parent.unwrap_or(0);
            match v.weight {
                Some(w) => s.push_str(&format!("{} {} {}\n", v.index, p, w)),
                None => s.push_str(&format!("{} {}\n", v.index, p)),
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Tree, TreeError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hl, header) = lines.next().ok_or(TreeError::Empty)?;
        let n: usize = header.parse().map_err(|_| TreeError::Parse {
            line: hl,
            msg: format!("bad vertex count {header:?}"),
        })?;
        let mut vs = Vec::with_capacity(n);
        for (line, l) in lines.by_ref().take(n) {
            let err = |msg: String| TreeError::Parse { line, msg };
            let fields: Vec<&str> = l.split_whitespace().collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(err(format!("expected `index parent [weight]`, got {l:?}")));
            }
            let index: u64 = fields[0].parse().map_err(|_| err(format!("bad index {:?}", fields[0])))?;
            let parent: u64 = fields[1].parse().map_err(|_| err(format!("bad parent {:?}", fields[1])))?;
            let weight = match fields.get(2) {
                Some(w) => Some(w.parse::<Weight>().map_err(err)?),
                None => None,
            };
            vs.push(Vertex::new(index, (parent != 0).then_some(parent), weight));
        }
        if vs.len() != n {
            return Err(TreeError::Parse {
                line: hl,
                msg: format!("header says {n} vertices, found {}", vs.len()),
            });
        }
        if let Some((line, _)) = lines.next() {
            return Err(TreeError::Parse { line, msg: "trailing lines after the last vertex".into() });
        }
        Tree::new(vs)
    }

    /// Is `a` an ancestor of `b` (or equal)? Walks parent pointers; intended for checks.
    pub fn is_ancestor(&self, a: usize, b: usize) -> bool {
        let mut cur = Some(b);
        while let Some(c) = cur {
            if c == a {
                return true;
            }
            cur = self.parent[c];
        }
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TreeKind {
    Path,
    FullBinary,
    Star,
    Caterpillar,
    RandomRecursive,
    Broom,
}

impl TreeKind {
    pub const ALL: [TreeKind; 6] = [
        TreeKind::Path,
        TreeKind::FullBinary,
        TreeKind::Star,
        TreeKind::Caterpillar,
        TreeKind::RandomRecursive,
        TreeKind::Broom,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TreeKind::Path => "path",
            TreeKind::FullBinary => "full_binary",
            TreeKind::Star => "star",
            TreeKind::Caterpillar => "caterpillar",
            TreeKind::RandomRecursive => "random_recursive",
            TreeKind::Broom => "broom",
        }
    }
}

impl FromStr for TreeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TreeKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s || k.name().replace('_', "-") == s)
            .ok_or_else(|| format!("unknown tree kind {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightDist {
    /// No weights written.
    None,
    /// Every edge weight 1.
    Unit,
    /// Uniform integers in `[lo, hi]`.
    Uniform { lo: i64, hi: i64 },
}

impl FromStr for WeightDist {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(WeightDist::None),
            "unit" => Ok(WeightDist::Unit),
            _ => {
                let bad = || format!("weight distribution must be none, unit or LO:HI, got {s:?}");
                let (a, b) = s.split_once(':').ok_or_else(bad)?;
                let lo: i64 = a.parse().map_err(|_| bad())?;
                let hi: i64 = b.parse().map_err(|_| bad())?;
                if lo < 0 || hi < lo {
                    return Err(bad());
                }
                Ok(WeightDist::Uniform { lo, hi })
            }
        }
    }
}

/// Generate a tree on labels `1..=n`. Deterministic per `(kind, n, seed, weights)`.
pub fn gen_tree(kind: TreeKind, n: usize, seed: u64, weights: WeightDist) -> Tree {
    assert!(n >= 1, "n must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parents = vec![0u64; n];
    match kind {
        TreeKind::Path => {
            for i in 1..n {
                parents[i] = i as u64;
            }
        }
        TreeKind::FullBinary => {
            for i in 1..n {
                parents[i] = (i as u64).div_ceil(2);
            }
        }
        TreeKind::Star => {
            for p in parents.iter_mut().skip(1) {
                *p = 1;
            }
        }
        TreeKind::Caterpillar => {
            let spine = n.div_ceil(2);
            for i in 1..spine {
                parents[i] = i as u64;
            }
            for p in parents.iter_mut().skip(spine) {
                *p = rng.gen_range(1..=spine as u64);
            }
        }
        TreeKind::RandomRecursive => {
            for (i, p) in parents.iter_mut().enumerate().skip(1) {
                *p = rng.gen_range(1..=i as u64);
            }
        }
        TreeKind::Broom => {
            let handle = n.div_ceil(2);
            for i in 1..handle {
                parents[i] = i as u64;
            }
            for p in parents.iter_mut().skip(handle) {
                *p = handle as u64;
            }
        }
    }
    let ws: Option<Vec<Weight>> = match weights {
        WeightDist::None => None,
        WeightDist::Unit => Some(vec![Weight::integer(1); n]),
        WeightDist::Uniform { lo, hi } => Some((0..n).map(|_| Weight::integer(rng.gen_range(lo..=hi))).collect()),
    };
    Tree::from_parents(&parents, ws.as_deref()).expect("generated parent arrays are trees")
}

/// Vertices of a tree placed on machines by a hash of their index.
#[derive(Clone, Debug)]
pub struct ShardedTree {
    /// Machine of each vertex position.
    pub machine_of: Vec<usize>,
    /// Vertex positions per machine, ascending.
    pub local: Vec<Vec<usize>>,
    /// Largest number of vertices on one machine.
    pub max_load: u64,
}

/// Place vertex `v` on machine `h(index(v))` with unit weight per vertex.
pub fn shard(tree: &Tree, h: &HashFn) -> Result<ShardedTree, crate::khash::HashError> {
    let items: Vec<WeightedItem> = tree
        .vertices()
        .iter()
        .map(|v| WeightedItem { index: v.index, weight: 1 })
        .collect();
    let (assignment, max_load) = distribute_weighted(&items, h)?;
    let mut local = vec![Vec::new(); h.range() as usize];
    let mut machine_of = vec![0; tree.len()];
    for (pos, v) in tree.vertices().iter().enumerate() {
        let m = assignment[&v.index];
        machine_of[pos] = m;
        local[m].push(pos);
    }
    Ok(ShardedTree { machine_of, local, max_load })
}

/// Points in `d` dimensions with integer coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointSet {
    pub dim: usize,
    pub coords: Vec<Vec<i64>>,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn emit(&self) -> String {
        let mut s = format!("{} {}\n", self.len(), self.dim);
        for p in &self.coords {
            let row: Vec<String> = p.iter().map(|x| x.to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<PointSet, TreeError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let (hl, header) = lines.next().ok_or(TreeError::Empty)?;
        let perr = |line: usize, msg: String| TreeError::Parse { line, msg };
        let hdr: Vec<usize> = header
            .split_whitespace()
            .map(|x| x.parse().map_err(|_| perr(hl, format!("bad header {header:?}"))))
            .collect::<Result<_, _>>()?;
        if hdr.len() != 2 {
            return Err(perr(hl, "expected header `n d`".into()));
        }
        let (n, dim) = (hdr[0], hdr[1]);
        let mut coords = Vec::with_capacity(n);
        for (line, l) in lines.take(n) {
            let row: Vec<i64> = l
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| perr(line, format!("bad coordinate {x:?}"))))
                .collect::<Result<_, _>>()?;
            if row.len() != dim {
                return Err(perr(line, format!("expected {dim} coordinates, got {}", row.len())));
            }
            coords.push(row);
        }
        if coords.len() != n {
            return Err(perr(hl, format!("header says {n} points, found {}", coords.len())));
        }
        Ok(PointSet { dim, coords })
    }
}

/// Uniform integer points in `[0, side)^d`.
pub fn gen_points(n: usize, dim: usize, side: i64, seed: u64) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(0..side)).collect()).collect();
    PointSet { dim, coords }
}

/// Weighted undirected edge list on vertices `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeListFile {
    pub n: usize,
    pub edges: Vec<(usize, usize, u64)>,
}

impl EdgeListFile {
    pub fn emit(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.edges.len());
        for (u, v, w) in &self.edges {
            s.push_str(&format!("{u} {v} {w}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<EdgeListFile, TreeError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let (hl, header) = lines.next().ok_or(TreeError::Empty)?;
        let perr = |line: usize, msg: String| TreeError::Parse { line, msg };
        let hdr: Vec<usize> = header
            .split_whitespace()
            .map(|x| x.parse().map_err(|_| perr(hl, format!("bad header {header:?}"))))
            .collect::<Result<_, _>>()?;
        if hdr.len() != 2 {
            return Err(perr(hl, "expected header `n m_edges`".into()));
        }
        let (n, m) = (hdr[0], hdr[1]);
        let mut edges = Vec::with_capacity(m);
        for (line, l) in lines.take(m) {
            let f: Vec<u64> = l
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| perr(line, format!("bad field {x:?}"))))
                .collect::<Result<_, _>>()?;
            if f.len() != 3 || f[0] as usize >= n || f[1] as usize >= n {
                return Err(perr(line, format!("expected `u v weight` with u, v < {n}")));
            }
            edges.push((f[0] as usize, f[1] as usize, f[2]));
        }
        if edges.len() != m {
            return Err(perr(hl, format!("header says {m} edges, found {}", edges.len())));
        }
        Ok(EdgeListFile { n, edges })
    }
}

/// Connected random graph: a random recursive spanning tree plus extra
/// random edges, `m_edges` in total (at least `n - 1`), weights in `[1, max_w]`.
pub fn gen_sparse_graph(n: usize, m_edges: usize, max_w: u64, seed: u64) -> EdgeListFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(m_edges.max(n.saturating_sub(1)));
    for v in 1..n {
        let u = rng.gen_range(0..v);
        edges.push((u, v, rng.gen_range(1..=max_w)));
    }
    while edges.len() < m_edges && n >= 2 {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v {
            edges.push((u, v, rng.gen_range(1..=max_w)));
        }
    }
    EdgeListFile { n, edges }
}

/// Count children per label, for quick shape checks.
pub fn child_counts(tree: &Tree) -> BTreeMap<u64, usize> {
    (0..tree.len()).map(|v| (tree.index(v), tree.children(v).len())).collect()
}
