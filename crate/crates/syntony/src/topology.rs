//! Random connected communication graphs and their consensus mixing matrices.
//!
//! A `NetworkGraph` is an undirected simple graph on nodes `0..n`. Graphs are
//! generated at a requested connectivity ratio `r = m / (n(n-1)/2)` by growing
//! a random spanning tree (uniform attachment after a random relabeling) and
//! then adding uniformly sampled extra edges, which guarantees connectivity at
//! any feasible ratio without rejection.
//!
//! A `MixingMatrix` is the symmetric doubly stochastic weight matrix of one
//! averaging iteration. Weights follow the Metropolis rule
//! `w_ij = 1 / (1 + max(deg_i, deg_j))`, which is computable from local degree
//! information only and yields a strictly positive diagonal, hence a second
//! eigenvalue strictly below one on connected graphs.
//!
//! Topology mutations (`mutate_topology`) rewire a live matrix the way a
//! network would at runtime: removals fold the edge weight back into the two
//! diagonals, additions move `0.2 * min(w_ii, w_jj)` onto the new edge. Both
//! preserve every mixing-matrix invariant; removals that would disconnect the
//! graph are rejected.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;
use rand::RngExt;

use crate::rng::SimRng;

pub type NodeId = usize;

// ---------------------------------------------------------------------------
// errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum TopologyError {
    /// Graphs need at least two nodes.
    TooFewNodes { n: usize },
    /// Connectivity ratio outside (0, 1].
    InvalidRatio { r: f64 },
    /// Requested edge count cannot form a connected graph.
    InsufficientEdges { requested: usize, required: usize },
    /// Operation requires a connected graph.
    DisconnectedGraph,
    /// The pair is not an edge of the graph.
    NotAnEdge { i: NodeId, j: NodeId },
    /// Removing this edge would disconnect the graph.
    WouldDisconnect { i: NodeId, j: NodeId },
    /// The pair is already an edge.
    AlreadyConnected { i: NodeId, j: NodeId },
    /// Self loops are not representable.
    SelfLoop { i: NodeId },
    /// Node index out of range.
    InvalidNode { node: NodeId, n: usize },
    /// Malformed edge-list or matrix text.
    Parse(String),
    /// Matrix failed an invariant check (message names the violation).
    InvalidMatrix(String),
    /// Mutation probabilities outside the unit interval or not summing to one.
    InvalidProbability(String),
}

impl fmt::Display for TopologyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TooFewNodes { n } => write!(f, "need at least 2 nodes, got {n}"),
            Self::InvalidRatio { r } => write!(f, "connectivity ratio {r} outside (0, 1]"),
            Self::InsufficientEdges { requested, required } => write!(
                f,
                "insufficient edges: {requested} requested but a connected graph needs {required}"
            ),
            Self::DisconnectedGraph => write!(f, "graph is not connected"),
            Self::NotAnEdge { i, j } => write!(f, "({i}, {j}) is not an edge"),
            Self::WouldDisconnect { i, j } => {
                write!(f, "removing ({i}, {j}) would disconnect the graph")
            }
            Self::AlreadyConnected { i, j } => write!(f, "({i}, {j}) is already an edge"),
            Self::SelfLoop { i } => write!(f, "self loop at node {i}"),
            Self::InvalidNode { node, n } => write!(f, "node {node} out of range for n={n}"),
            Self::Parse(msg) => write!(f, "parse error: {msg}"),
            Self::InvalidMatrix(msg) => write!(f, "invalid mixing matrix: {msg}"),
            Self::InvalidProbability(msg) => write!(f, "invalid probability: {msg}"),
        }
    }
}

impl std::error::Error for TopologyError {}

// ---------------------------------------------------------------------------
// NetworkGraph
// ---------------------------------------------------------------------------

/// Undirected simple graph on nodes `0..n`, edges stored as ordered pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkGraph {
    n: usize,
    edges: BTreeSet<(NodeId, NodeId)>,
}

impl NetworkGraph {
    /// Builds a graph from an explicit edge list. Edges are normalized to
    /// `(min, max)`; duplicates and self loops are rejected.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, TopologyError> {
        if n < 2 {
            return Err(TopologyError::TooFewNodes { n });
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(TopologyError::SelfLoop { i: a });
            }
            for node in [a, b] {
                if node >= n {
                    return Err(TopologyError::InvalidNode { node, n });
                }
            }
            let e = (a.min(b), a.max(b));
            if !set.insert(e) {
                return Err(TopologyError::Parse(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
        }
        Ok(Self { n, edges: set })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: NodeId, j: NodeId) -> bool {
        i != j && self.edges.contains(&(i.min(j), i.max(j)))
    }

    /// Edges in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn connectivity_ratio(&self) -> f64 {
        connectivity_ratio(self)
    }

    pub fn is_connected(&self) -> bool {
        is_connected(self)
    }

    fn adjacency(&self) -> Vec<Vec<NodeId>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    fn insert_edge(&mut self, i: NodeId, j: NodeId) {
        self.edges.insert((i.min(j), i.max(j)));
    }

    fn delete_edge(&mut self, i: NodeId, j: NodeId) {
        self.edges.remove(&(i.min(j), i.max(j)));
    }

    /// Serializes to the edge-list text format: first line `n m`, then one
    /// `i j` line per edge, 0-based, in sorted order.
    pub fn to_edge_list_string(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for &(a, b) in &self.edges {
            out.push_str(&format!("{a} {b}\n"));
        }
        out
    }

    /// Parses the edge-list text format produced by [`to_edge_list_string`].
    ///
    /// [`to_edge_list_string`]: NetworkGraph::to_edge_list_string
    pub fn parse_edge_list(text: &str) -> Result<Self, TopologyError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| TopologyError::Parse("empty edge list".into()))?;
        let mut it = header.split_whitespace();
        let n: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| TopologyError::Parse("bad header: expected `n m`".into()))?;
        let m: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| TopologyError::Parse("bad header: expected `n m`".into()))?;
        let mut edges = Vec::with_capacity(m);
        for line in lines {
            let mut it = line.split_whitespace();
            let a: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| TopologyError::Parse(format!("bad edge line: {line:?}")))?;
            let b: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| TopologyError::Parse(format!("bad edge line: {line:?}")))?;
            edges.push((a, b));
        }
        if edges.len() != m {
            return Err(TopologyError::Parse(format!(
                "header promised {m} edges, found {}",
                edges.len()
            )));
        }
        Self::from_edges(n, edges)
    }
}

/// Fraction of possible links present: `m / (n(n-1)/2)`.
pub fn connectivity_ratio(g: &NetworkGraph) -> f64 {
    let total = g.n * (g.n - 1) / 2;
    g.edge_count() as f64 / total as f64
}

/// True iff every node is reachable from node 0 by breadth-first traversal.
pub fn is_connected(g: &NetworkGraph) -> bool {
    let adj = g.adjacency();
    let mut seen = vec![false; g.n];
    let mut queue = std::collections::VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == g.n
}

/// Generates a connected graph with exactly `round(r * n(n-1)/2)` edges.
///
/// Construction: a random spanning tree by uniform attachment (node `k` of a
/// random relabeling connects to a uniform choice among the first `k`), then
/// uniformly sampled additional edges up to the target count.
pub fn generate_connected_graph(
    n: usize,
    r: f64,
    rng: &mut SimRng,
) -> Result<NetworkGraph, TopologyError> {
    if n < 2 {
        return Err(TopologyError::TooFewNodes { n });
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(TopologyError::InvalidRatio { r });
    }
    let total = n * (n - 1) / 2;
    let m = (r * total as f64).round() as usize;
    if m < n - 1 {
        return Err(TopologyError::InsufficientEdges { requested: m, required: n - 1 });
    }

    // Random relabeling, then uniform attachment: a random recursive tree.
    let mut perm: Vec<NodeId> = (0..n).collect();
    for k in (1..n).rev() {
        let j = rng.random_range(0..=k);
        perm.swap(k, j);
    }
    let mut g = NetworkGraph { n, edges: BTreeSet::new() };
    for k in 1..n {
        let j = rng.random_range(0..k);
        g.insert_edge(perm[k], perm[j]);
    }
    while g.edge_count() < m {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b && !g.has_edge(a, b) {
            g.insert_edge(a, b);
        }
    }
    Ok(g)
}

/// Marks which edges (in `g.edges()` order) are bridges.
fn bridge_flags(g: &NetworkGraph) -> Vec<bool> {
    let edges: Vec<(NodeId, NodeId)> = g.edges().collect();
    let mut adj: Vec<Vec<(NodeId, usize)>> = vec![Vec::new(); g.n];
    for (idx, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, idx));
        adj[b].push((a, idx));
    }
    let mut disc = vec![usize::MAX; g.n];
    let mut low = vec![0usize; g.n];
    let mut flags = vec![false; edges.len()];
    let mut timer = 0usize;
    // Iterative DFS so pathological path graphs cannot overflow the stack.
    let mut stack: Vec<(NodeId, usize, usize)> = Vec::new(); // (node, parent edge, next child)
    for start in 0..g.n {
        if disc[start] != usize::MAX {
            continue;
        }
        disc[start] = timer;
        low[start] = timer;
        timer += 1;
        stack.push((start, usize::MAX, 0));
        while let Some(&mut (u, pe, ref mut next)) = stack.last_mut() {
            if *next < adj[u].len() {
                let (v, eidx) = adj[u][*next];
                *next += 1;
                if eidx == pe {
                    continue;
                }
                if disc[v] != usize::MAX {
                    low[u] = low[u].min(disc[v]);
                } else {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, eidx, 0));
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        flags[pe] = true;
                    }
                }
            }
        }
    }
    flags
}

// ---------------------------------------------------------------------------
// MixingMatrix
// ---------------------------------------------------------------------------

/// Symmetric doubly stochastic averaging matrix, dense row-major storage.
///
/// Invariants held by every constructor and mutation in this module:
/// `w[i][j] == w[j][i]` bitwise, row and column sums within 1e-12 of one,
/// off-diagonal entries nonnegative and zero exactly for non-edges, diagonal
/// entries strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    n: usize,
    w: Vec<f64>,
}

impl MixingMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.w[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    /// One averaging step: `y = W x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "vector length must match matrix size");
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.w[i * self.n..(i + 1) * self.n];
            let mut acc = 0.0;
            for (wij, xj) in row.iter().zip(x) {
                acc += wij * xj;
            }
            y[i] = acc;
        }
        y
    }

    /// Checks every structural invariant, naming the first violation.
    pub fn validate(&self, g: Option<&NetworkGraph>) -> Result<(), TopologyError> {
        let n = self.n;
        for i in 0..n {
            if !(self.get(i, i) > 0.0) {
                return Err(TopologyError::InvalidMatrix(format!(
                    "diagonal w[{i}][{i}] = {} not strictly positive",
                    self.get(i, i)
                )));
            }
            let mut sum = 0.0;
            for j in 0..n {
                let wij = self.get(i, j);
                sum += wij;
                if i != j && wij < 0.0 {
                    return Err(TopologyError::InvalidMatrix(format!(
                        "negative off-diagonal w[{i}][{j}] = {wij}"
                    )));
                }
                if self.get(j, i).to_bits() != wij.to_bits() {
                    return Err(TopologyError::InvalidMatrix(format!(
                        "asymmetry at ({i}, {j})"
                    )));
                }
                if let Some(g) = g {
                    if i != j && !g.has_edge(i, j) && wij != 0.0 {
                        return Err(TopologyError::InvalidMatrix(format!(
                            "nonzero weight {wij} on non-edge ({i}, {j})"
                        )));
                    }
                }
            }
            if (sum - 1.0).abs() >= 1e-12 {
                return Err(TopologyError::InvalidMatrix(format!(
                    "row {i} sums to {sum}, off by {}",
                    sum - 1.0
                )));
            }
        }
        Ok(())
    }

    /// CSV form: n rows of n comma-separated entries, 17 significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.n * self.n * 24);
        for i in 0..self.n {
            for j in 0..self.n {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{:.16e}", self.get(i, j)));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the CSV form written by [`to_csv_string`] and revalidates.
    ///
    /// [`to_csv_string`]: MixingMatrix::to_csv_string
    pub fn parse_csv(text: &str) -> Result<Self, TopologyError> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let row: Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse()).collect();
            rows.push(row.map_err(|e| TopologyError::Parse(format!("bad matrix entry: {e}")))?);
        }
        let n = rows.len();
        if n < 2 {
            return Err(TopologyError::TooFewNodes { n });
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(TopologyError::Parse("matrix is not square".into()));
        }
        let m = Self { n, w: rows.concat() };
        m.validate(None)?;
        Ok(m)
    }
}

/// Metropolis weights for a connected graph.
pub fn build_mixing_matrix(g: &NetworkGraph) -> Result<MixingMatrix, TopologyError> {
    if !is_connected(g) {
        return Err(TopologyError::DisconnectedGraph);
    }
    let n = g.n();
    let deg = g.degrees();
    let mut w = MixingMatrix { n, w: vec![0.0; n * n] };
    for (a, b) in g.edges() {
        let weight = 1.0 / (1.0 + deg[a].max(deg[b]) as f64);
        w.set(a, b, weight);
        w.set(b, a, weight);
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| w.get(i, j)).sum();
        w.set(i, i, 1.0 - off);
    }
    Ok(w)
}

/// Largest eigenvalue magnitude after the simple eigenvalue 1.
///
/// Strictly below one for connected graphs with positive diagonals; the gap
/// `1 - lambda2` governs the geometric convergence rate of averaging.
pub fn second_eigenvalue(w: &MixingMatrix) -> f64 {
    let m = DMatrix::from_row_slice(w.n, w.n, &w.w);
    let eig = m.symmetric_eigenvalues();
    let mut mags: Vec<f64> = eig.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    mags[1]
}

/// Second-largest eigenvalue magnitude of the product `a * b`.
///
/// The product of two symmetric stochastic matrices is stochastic but not
/// symmetric, so this goes through the general (complex) eigensolver.
pub fn second_eigenvalue_of_product(a: &MixingMatrix, b: &MixingMatrix) -> f64 {
    assert_eq!(a.n, b.n, "matrix sizes must match");
    let ma = DMatrix::from_row_slice(a.n, a.n, &a.w);
    let mb = DMatrix::from_row_slice(b.n, b.n, &b.w);
    let prod = ma * mb;
    let eig = prod.complex_eigenvalues();
    let mut mags: Vec<f64> = eig.iter().map(|c| c.norm()).collect();
    mags.sort_by(|x, y| y.partial_cmp(x).unwrap());
    mags[1]
}

/// Removes edge `(i, j)`, folding its weight back into the two diagonals:
/// `[w_ii, w_ij, w_ji, w_jj] -> [w_ii + w_ij, 0, 0, w_ji + w_jj]`.
///
/// Rejects removals that would disconnect the graph, since consensus then no
/// longer reaches the global average.
pub fn remove_edge_weights(
    w: &MixingMatrix,
    g: &NetworkGraph,
    i: NodeId,
    j: NodeId,
) -> Result<(MixingMatrix, NetworkGraph), TopologyError> {
    for node in [i, j] {
        if node >= g.n() {
            return Err(TopologyError::InvalidNode { node, n: g.n() });
        }
    }
    if !g.has_edge(i, j) {
        return Err(TopologyError::NotAnEdge { i, j });
    }
    let edges: Vec<(NodeId, NodeId)> = g.edges().collect();
    let flags = bridge_flags(g);
    let key = (i.min(j), i.max(j));
    let idx = edges.binary_search(&key).expect("edge present");
    if flags[idx] {
        return Err(TopologyError::WouldDisconnect { i, j });
    }
    let mut w2 = w.clone();
    let mut g2 = g.clone();
    remove_edge_in_place(&mut w2, &mut g2, i, j);
    Ok((w2, g2))
}

fn remove_edge_in_place(w: &mut MixingMatrix, g: &mut NetworkGraph, i: NodeId, j: NodeId) {
    let wij = w.get(i, j);
    w.set(i, i, w.get(i, i) + wij);
    w.set(j, j, w.get(j, j) + wij);
    w.set(i, j, 0.0);
    w.set(j, i, 0.0);
    g.delete_edge(i, j);
}

/// Adds edge `(i, j)` with weight `0.2 * min(w_ii, w_jj)` taken from the two
/// diagonals: `[w_ii, 0, 0, w_jj] -> [w_ii - w, w, w, w_jj - w]`.
pub fn add_edge_weights(
    w: &MixingMatrix,
    g: &NetworkGraph,
    i: NodeId,
    j: NodeId,
) -> Result<(MixingMatrix, NetworkGraph), TopologyError> {
    for node in [i, j] {
        if node >= g.n() {
            return Err(TopologyError::InvalidNode { node, n: g.n() });
        }
    }
    if i == j {
        return Err(TopologyError::SelfLoop { i });
    }
    if g.has_edge(i, j) {
        return Err(TopologyError::AlreadyConnected { i, j });
    }
    let mut w2 = w.clone();
    let mut g2 = g.clone();
    add_edge_in_place(&mut w2, &mut g2, i, j);
    Ok((w2, g2))
}

fn add_edge_in_place(w: &mut MixingMatrix, g: &mut NetworkGraph, i: NodeId, j: NodeId) {
    let weight = 0.2 * w.get(i, i).min(w.get(j, j));
    w.set(i, i, w.get(i, i) - weight);
    w.set(j, j, w.get(j, j) - weight);
    w.set(i, j, weight);
    w.set(j, i, weight);
    g.insert_edge(i, j);
}

/// Which branch a topology mutation took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationKind {
    NoChange,
    Removed(NodeId, NodeId),
    Added(NodeId, NodeId),
}

impl MutationKind {
    pub fn is_change(&self) -> bool {
        !matches!(self, Self::NoChange)
    }
}

impl fmt::Display for MutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoChange => write!(f, "none"),
            Self::Removed(..) => write!(f, "remove"),
            Self::Added(..) => write!(f, "add"),
        }
    }
}

/// Branch probabilities for one mutation draw. Must sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutationProbs {
    no_change: f64,
    remove: f64,
    add: f64,
}

impl MutationProbs {
    pub fn new(no_change: f64, add: f64, remove: f64) -> Result<Self, TopologyError> {
        for (name, p) in [("no_change", no_change), ("add", add), ("remove", remove)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(TopologyError::InvalidProbability(format!(
                    "{name} = {p} outside [0, 1]"
                )));
            }
        }
        let sum = no_change + add + remove;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(TopologyError::InvalidProbability(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(Self { no_change, remove, add })
    }

    /// No change with probability `p1`, the rest split evenly.
    pub fn symmetric(p1: f64) -> Result<Self, TopologyError> {
        if !(0.0..=1.0).contains(&p1) {
            return Err(TopologyError::InvalidProbability(format!("p1 = {p1} outside [0, 1]")));
        }
        let half = (1.0 - p1) / 2.0;
        Ok(Self { no_change: p1, remove: half, add: half })
    }

    pub fn no_change(&self) -> f64 {
        self.no_change
    }
    pub fn add(&self) -> f64 {
        self.add
    }
    pub fn remove(&self) -> f64 {
        self.remove
    }
}

/// One random topology mutation with no-change probability `p1` and the
/// remaining probability split evenly between removing a uniformly random
/// removable (non-bridge) edge and adding a uniformly random absent pair.
///
/// An infeasible branch (no removable edge, or complete graph) degrades to no
/// change rather than erroring, so long simulations keep running.
pub fn mutate_topology(
    w: &MixingMatrix,
    g: &NetworkGraph,
    p1: f64,
    rng: &mut SimRng,
) -> Result<(MixingMatrix, NetworkGraph, MutationKind), TopologyError> {
    let probs = MutationProbs::symmetric(p1)?;
    mutate_topology_weighted(w, g, &probs, rng)
}

/// [`mutate_topology`] generalized to an arbitrary branch-probability triple.
pub fn mutate_topology_weighted(
    w: &MixingMatrix,
    g: &NetworkGraph,
    probs: &MutationProbs,
    rng: &mut SimRng,
) -> Result<(MixingMatrix, NetworkGraph, MutationKind), TopologyError> {
    let mut w2 = w.clone();
    let mut g2 = g.clone();
    let kind = mutate_in_place(&mut w2, &mut g2, probs, rng);
    Ok((w2, g2, kind))
}

/// Worker shared by the pure wrappers and the hot simulation loops.
pub(crate) fn mutate_in_place(
    w: &mut MixingMatrix,
    g: &mut NetworkGraph,
    probs: &MutationProbs,
    rng: &mut SimRng,
) -> MutationKind {
    let alpha: f64 = rng.random_range(0.0..1.0);
    if alpha <= probs.no_change {
        MutationKind::NoChange
    } else if alpha <= probs.no_change + probs.remove {
        let edges: Vec<(NodeId, NodeId)> = g.edges().collect();
        let flags = bridge_flags(g);
        let removable: Vec<(NodeId, NodeId)> = edges
            .iter()
            .zip(&flags)
            .filter(|&(_, &bridge)| !bridge)
            .map(|(&e, _)| e)
            .collect();
        if removable.is_empty() {
            return MutationKind::NoChange;
        }
        let (i, j) = removable[rng.random_range(0..removable.len())];
        remove_edge_in_place(w, g, i, j);
        MutationKind::Removed(i, j)
    } else {
        let n = g.n();
        let total = n * (n - 1) / 2;
        if g.edge_count() == total {
            return MutationKind::NoChange;
        }
        // Rejection sampling is uniform over absent pairs and cheap on sparse
        // graphs; fall back to enumeration when the graph is nearly complete.
        for _ in 0..64 {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b && !g.has_edge(a, b) {
                add_edge_in_place(w, g, a, b);
                return MutationKind::Added(a.min(b), a.max(b));
            }
        }
        let mut absent = Vec::with_capacity(total - g.edge_count());
        for a in 0..n {
            for b in (a + 1)..n {
                if !g.has_edge(a, b) {
                    absent.push((a, b));
                }
            }
        }
        let (i, j) = absent[rng.random_range(0..absent.len())];
        add_edge_in_place(w, g, i, j);
        MutationKind::Added(i, j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::master_rng;

    fn path3() -> NetworkGraph {
        NetworkGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn connectivity_ratio_examples() {
        let mut rng = master_rng(1);
        let g = generate_connected_graph(20, 0.1, &mut rng).unwrap();
        assert_eq!(g.edge_count(), 19);
        assert!((connectivity_ratio(&g) - 0.1).abs() < 1e-12);

        let complete = NetworkGraph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
            .unwrap();
        assert_eq!(connectivity_ratio(&complete), 1.0);

        let tree5 = NetworkGraph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        assert_eq!(connectivity_ratio(&tree5), 0.4);
    }

    #[test]
    fn is_connected_examples() {
        assert!(is_connected(&path3()));
        let split = NetworkGraph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert!(!is_connected(&split));
    }

    #[test]
    fn generation_edge_count_and_connectivity() {
        for seed in 0..50 {
            let mut rng = master_rng(seed);
            for &(n, r) in &[(10usize, 0.3), (20, 0.1), (50, 0.05), (100, 0.9), (5, 0.4)] {
                let g = generate_connected_graph(n, r, &mut rng).unwrap();
                let expect = (r * (n * (n - 1) / 2) as f64).round() as usize;
                assert_eq!(g.edge_count(), expect, "n={n} r={r} seed={seed}");
                assert!(is_connected(&g), "n={n} r={r} seed={seed}");
            }
        }
    }

    #[test]
    fn generation_rejects_bad_parameters() {
        let mut rng = master_rng(0);
        assert!(matches!(
            generate_connected_graph(1, 0.5, &mut rng),
            Err(TopologyError::TooFewNodes { .. })
        ));
        assert!(matches!(
            generate_connected_graph(10, 0.0, &mut rng),
            Err(TopologyError::InvalidRatio { .. })
        ));
        assert!(matches!(
            generate_connected_graph(10, 1.5, &mut rng),
            Err(TopologyError::InvalidRatio { .. })
        ));
        assert!(matches!(
            generate_connected_graph(20, 0.001, &mut rng),
            Err(TopologyError::InsufficientEdges { requested: 0, required: 19 })
        ));
    }

    #[test]
    fn metropolis_weights_on_path() {
        let w = build_mixing_matrix(&path3()).unwrap();
        let third = 1.0 / 3.0;
        assert_eq!(w.get(0, 1), third);
        assert_eq!(w.get(1, 2), third);
        assert_eq!(w.get(0, 2), 0.0);
        assert!((w.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((w.get(1, 1) - third).abs() < 1e-15);
        assert!((w.get(2, 2) - 2.0 / 3.0).abs() < 1e-15);
        w.validate(Some(&path3())).unwrap();
    }

    #[test]
    fn metropolis_two_nodes() {
        let g = NetworkGraph::from_edges(2, [(0, 1)]).unwrap();
        let w = build_mixing_matrix(&g).unwrap();
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert_eq!(w.get(i, j), 0.5);
        }
        assert!(second_eigenvalue(&w).abs() < 1e-12);
    }

    #[test]
    fn disconnected_graph_rejected() {
        let split = NetworkGraph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert!(matches!(build_mixing_matrix(&split), Err(TopologyError::DisconnectedGraph)));
    }

    #[test]
    fn second_eigenvalue_of_path_is_two_thirds() {
        // Eigenvalues of the 3-node path Metropolis matrix are {1, 2/3, 0}.
        let w = build_mixing_matrix(&path3()).unwrap();
        assert!((second_eigenvalue(&w) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn second_eigenvalue_below_one_for_generated_graphs() {
        for seed in 0..20 {
            let mut rng = master_rng(seed);
            let g = generate_connected_graph(30, 0.2, &mut rng).unwrap();
            let w = build_mixing_matrix(&g).unwrap();
            let l2 = second_eigenvalue(&w);
            assert!(l2 < 1.0 && l2 >= 0.0, "lambda2 = {l2}");
        }
    }

    #[test]
    fn product_eigenvalue_matches_square_for_identical_factors() {
        let mut rng = master_rng(9);
        let g = generate_connected_graph(25, 0.2, &mut rng).unwrap();
        let w = build_mixing_matrix(&g).unwrap();
        let l2 = second_eigenvalue(&w);
        let lp = second_eigenvalue_of_product(&w, &w);
        assert!((lp - l2 * l2).abs() < 1e-9, "lp={lp} l2^2={}", l2 * l2);
    }

    #[test]
    fn remove_bridge_rejected() {
        let g = path3();
        let w = build_mixing_matrix(&g).unwrap();
        assert!(matches!(
            remove_edge_weights(&w, &g, 0, 1),
            Err(TopologyError::WouldDisconnect { .. })
        ));
        assert!(matches!(
            remove_edge_weights(&w, &g, 0, 2),
            Err(TopologyError::NotAnEdge { .. })
        ));
    }

    #[test]
    fn remove_on_cycle_folds_weight_into_diagonals() {
        let g = NetworkGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let w = build_mixing_matrix(&g).unwrap();
        let w01 = w.get(0, 1);
        let (w2, g2) = remove_edge_weights(&w, &g, 0, 1).unwrap();
        assert_eq!(w2.get(0, 1), 0.0);
        assert_eq!(w2.get(1, 0), 0.0);
        assert_eq!(w2.get(0, 0), w.get(0, 0) + w01);
        assert_eq!(w2.get(1, 1), w.get(1, 1) + w01);
        assert!(!g2.has_edge(0, 1));
        w2.validate(Some(&g2)).unwrap();
    }

    #[test]
    fn add_edge_weight_rule() {
        // Diagonals 0.5 and 0.3 give a new edge weight of 0.06.
        let g = NetworkGraph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let mut w = build_mixing_matrix(&g).unwrap();
        w.set(0, 0, 0.5);
        w.set(3, 3, 0.3);
        let (w2, g2) = add_edge_weights(&w, &g, 0, 3).unwrap();
        assert!((w2.get(0, 3) - 0.06).abs() < 1e-15);
        assert!((w2.get(0, 0) - 0.44).abs() < 1e-15);
        assert!((w2.get(3, 3) - 0.24).abs() < 1e-15);
        assert!(g2.has_edge(0, 3));

        assert!(matches!(add_edge_weights(&w, &g, 0, 1), Err(TopologyError::AlreadyConnected { .. })));
        assert!(matches!(add_edge_weights(&w, &g, 2, 2), Err(TopologyError::SelfLoop { .. })));
    }

    #[test]
    fn add_then_remove_restores_diagonals() {
        let mut rng = master_rng(3);
        let g = generate_connected_graph(12, 0.3, &mut rng).unwrap();
        let w = build_mixing_matrix(&g).unwrap();
        let (mut i, mut j) = (0, 0);
        'outer: for a in 0..12 {
            for b in (a + 1)..12 {
                if !g.has_edge(a, b) {
                    (i, j) = (a, b);
                    break 'outer;
                }
            }
        }
        let (wa, ga) = add_edge_weights(&w, &g, i, j).unwrap();
        let (wr, gr) = remove_edge_weights(&wa, &ga, i, j).unwrap();
        // One rounding each way; diagonals come back within an ulp.
        assert!((wr.get(i, i) - w.get(i, i)).abs() <= f64::EPSILON * w.get(i, i));
        assert!((wr.get(j, j) - w.get(j, j)).abs() <= f64::EPSILON * w.get(j, j));
        assert_eq!(gr, g);
    }

    #[test]
    fn mutation_p1_one_never_changes() {
        let mut rng = master_rng(5);
        let g = generate_connected_graph(15, 0.2, &mut rng).unwrap();
        let w = build_mixing_matrix(&g).unwrap();
        for _ in 0..100 {
            let (w2, g2, kind) = mutate_topology(&w, &g, 1.0, &mut rng).unwrap();
            assert_eq!(kind, MutationKind::NoChange);
            assert_eq!(w2, w);
            assert_eq!(g2, g);
        }
    }

    #[test]
    fn mutation_p1_zero_balances_branches() {
        let mut rng = master_rng(6);
        let g = generate_connected_graph(30, 0.2, &mut rng).unwrap();
        let w = build_mixing_matrix(&g).unwrap();
        let (mut wc, mut gc) = (w, g);
        let (mut adds, mut removes) = (0u32, 0u32);
        for _ in 0..10_000 {
            let kind;
            (wc, gc, kind) = mutate_topology(&wc, &gc, 0.0, &mut rng).unwrap();
            match kind {
                MutationKind::Added(..) => adds += 1,
                MutationKind::Removed(..) => removes += 1,
                MutationKind::NoChange => {}
            }
        }
        let add_frac = adds as f64 / 10_000.0;
        let rem_frac = removes as f64 / 10_000.0;
        assert!((add_frac - 0.5).abs() < 0.02, "add fraction {add_frac}");
        assert!((rem_frac - 0.5).abs() < 0.02, "remove fraction {rem_frac}");
    }

    #[test]
    fn mutation_preserves_invariants_and_connectivity() {
        let mut rng = master_rng(7);
        let g = generate_connected_graph(20, 0.12, &mut rng).unwrap();
        let w = build_mixing_matrix(&g).unwrap();
        let (mut wc, mut gc) = (w, g);
        for step in 0..2_000 {
            (wc, gc, _) = mutate_topology(&wc, &gc, 0.2, &mut rng).unwrap();
            assert!(is_connected(&gc), "disconnected after step {step}");
        }
        wc.validate(Some(&gc)).unwrap();
    }

    #[test]
    fn tree_remove_branch_degrades_to_no_change() {
        // Every edge of a tree is a bridge, so only adds or no-ops can occur.
        let g = NetworkGraph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let w = build_mixing_matrix(&g).unwrap();
        let mut rng = master_rng(8);
        for _ in 0..200 {
            let (_, _, kind) = mutate_topology(&w, &g, 0.0, &mut rng).unwrap();
            assert!(!matches!(kind, MutationKind::Removed(..)));
        }
    }

    #[test]
    fn complete_graph_add_branch_degrades_to_no_change() {
        let g = NetworkGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let w = build_mixing_matrix(&g).unwrap();
        let mut rng = master_rng(9);
        for _ in 0..200 {
            let (_, _, kind) = mutate_topology(&w, &g, 0.0, &mut rng).unwrap();
            assert!(!matches!(kind, MutationKind::Added(..)));
        }
    }

    #[test]
    fn edge_list_round_trip() {
        let mut rng = master_rng(10);
        let g = generate_connected_graph(17, 0.25, &mut rng).unwrap();
        let text = g.to_edge_list_string();
        let parsed = NetworkGraph::parse_edge_list(&text).unwrap();
        assert_eq!(parsed, g);
        assert!(text.starts_with(&format!("17 {}\n", g.edge_count())));
    }

    #[test]
    fn edge_list_rejects_malformed_input() {
        assert!(NetworkGraph::parse_edge_list("").is_err());
        assert!(NetworkGraph::parse_edge_list("3 1\n0 0\n").is_err());
        assert!(NetworkGraph::parse_edge_list("3 2\n0 1\n0 1\n").is_err());
        assert!(NetworkGraph::parse_edge_list("3 1\n0 5\n").is_err());
        assert!(NetworkGraph::parse_edge_list("3 2\n0 1\n").is_err());
    }

    #[test]
    fn matrix_csv_round_trip_is_exact() {
        let mut rng = master_rng(11);
        let g = generate_connected_graph(9, 0.4, &mut rng).unwrap();
        let w = build_mixing_matrix(&g).unwrap();
        let parsed = MixingMatrix::parse_csv(&w.to_csv_string()).unwrap();
        assert_eq!(parsed, w);
    }

    #[test]
    fn lambda2_decreases_with_density_on_average() {
        let l2_mean = |r: f64| {
            let mut acc = 0.0;
            for seed in 0..30 {
                let mut rng = master_rng(1000 + seed);
                let g = generate_connected_graph(60, r, &mut rng).unwrap();
                acc += second_eigenvalue(&build_mixing_matrix(&g).unwrap());
            }
            acc / 30.0
        };
        let sparse = l2_mean(0.05);
        let mid = l2_mean(0.3);
        let dense = l2_mean(0.9);
        assert!(dense < mid && mid < sparse, "{dense} < {mid} < {sparse} violated");
    }
}
