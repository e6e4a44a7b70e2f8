//! Undirected simple graphs on vertices `1..=d` and the combinatorial
//! primitives used by the tests and the lower-bound machinery.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

mod format;
mod search;
mod spanning;
mod walks;

pub use search::{greedy_structure_search, Structure};
pub use spanning::{max_spanning_forest, max_spanning_tree, EdgeWeights};
pub use walks::WalkMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("vertex {vertex} out of range 1..={d}")]
    VertexOutOfRange { vertex: usize, d: usize },
    #[error("invalid edge ({0}, {1}): endpoints must be distinct and positive")]
    InvalidEdge(usize, usize),
    #[error("duplicate edge {0}")]
    DuplicateEdge(Edge),
    #[error("edge set is empty")]
    EmptyEdgeSet,
    #[error("walk length must be at least 1")]
    ZeroWalkLength,
    #[error("closed walk count overflows at length {k}")]
    WalkCountOverflow { k: usize },
    #[error("need at least {needed} vertices, got {d}")]
    TooFewVertices { needed: usize, d: usize },
    #[error("component count {m} outside 1..={d}")]
    ComponentCountOutOfRange { m: usize, d: usize },
    #[error("invalid weight {weight} on edge {edge}")]
    InvalidWeight { edge: Edge, weight: f64 },
    #[error("weight matrix must be square, got {rows}x{cols}")]
    NonSquareWeights { rows: usize, cols: usize },
    #[error("structure {0:?} never appeared")]
    StructureNotFound(Structure),
    #[error("malformed edge list at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// Unordered vertex pair stored as `(lo, hi)` with `lo < hi`.
///
/// The derived ordering is lexicographic on `(lo, hi)`, which is the
/// tie-break order used by every weight-ordered routine in this module.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "(usize, usize)", try_from = "(usize, usize)")]
pub struct Edge {
    lo: usize,
    hi: usize,
}

impl Edge {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a == b || a == 0 || b == 0 {
            return Err(GraphError::InvalidEdge(a, b));
        }
        Ok(Edge { lo: a.min(b), hi: a.max(b) })
    }

    pub fn lo(self) -> usize {
        self.lo
    }

    pub fn hi(self) -> usize {
        self.hi
    }

    pub fn endpoints(self) -> [usize; 2] {
        [self.lo, self.hi]
    }

    pub fn contains(self, v: usize) -> bool {
        self.lo == v || self.hi == v
    }

    pub fn shares_vertex(self, other: Edge) -> bool {
        self.contains(other.lo) || self.contains(other.hi)
    }

    /// The endpoint that is not `v`, if `v` is an endpoint.
    pub fn other(self, v: usize) -> Option<usize> {
        if v == self.lo {
            Some(self.hi)
        } else if v == self.hi {
            Some(self.lo)
        } else {
            None
        }
    }

    fn check(self, d: usize) -> Result<()> {
        if self.hi > d {
            return Err(GraphError::VertexOutOfRange { vertex: self.hi, d });
        }
        Ok(())
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.lo, self.hi)
    }
}

impl From<Edge> for (usize, usize) {
    fn from(e: Edge) -> Self {
        (e.lo, e.hi)
    }
}

impl TryFrom<(usize, usize)> for Edge {
    type Error = GraphError;

    fn try_from((a, b): (usize, usize)) -> Result<Self> {
        Edge::new(a, b)
    }
}

/// Shorthand for building edges from literals; panics on invalid pairs.
pub fn edge(a: usize, b: usize) -> Edge {
    Edge::new(a, b).expect("invalid edge literal")
}

/// Sorted set of edges.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeSet(BTreeSet<Edge>);

impl EdgeSet {
    pub fn new() -> Self {
        EdgeSet(BTreeSet::new())
    }

    pub fn from_pairs(pairs: &[(usize, usize)]) -> Result<Self> {
        pairs.iter().map(|&(a, b)| Edge::new(a, b)).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn insert(&mut self, e: Edge) -> bool {
        self.0.insert(e)
    }

    pub fn remove(&mut self, e: &Edge) -> bool {
        self.0.remove(e)
    }

    pub fn contains(&self, e: &Edge) -> bool {
        self.0.contains(e)
    }

    pub fn iter(&self) -> impl Iterator<Item = Edge> + '_ {
        self.0.iter().copied()
    }

    /// Vertex support `V(S)`.
    pub fn vertices(&self) -> BTreeSet<usize> {
        self.iter().flat_map(Edge::endpoints).collect()
    }

    pub fn max_vertex(&self) -> usize {
        self.iter().map(Edge::hi).max().unwrap_or(0)
    }

    pub fn intersection_len(&self, other: &EdgeSet) -> usize {
        self.0.intersection(&other.0).count()
    }

    pub fn union(&self, other: &EdgeSet) -> EdgeSet {
        EdgeSet(self.0.union(&other.0).copied().collect())
    }

    pub fn is_subset(&self, other: &EdgeSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_disjoint(&self, other: &EdgeSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn to_vec(&self) -> Vec<Edge> {
        self.iter().collect()
    }
}

impl FromIterator<Edge> for EdgeSet {
    fn from_iter<I: IntoIterator<Item = Edge>>(iter: I) -> Self {
        EdgeSet(iter.into_iter().collect())
    }
}

impl Extend<Edge> for EdgeSet {
    fn extend<I: IntoIterator<Item = Edge>>(&mut self, iter: I) {
        self.0.extend(iter)
    }
}

impl<'a> IntoIterator for &'a EdgeSet {
    type Item = Edge;
    type IntoIter = std::iter::Copied<std::collections::btree_set::Iter<'a, Edge>>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter().copied()
    }
}

impl fmt::Display for EdgeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, e) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str("}")
    }
}

/// Geodesic distance; `Unreachable` orders above every finite value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Distance {
    Finite(usize),
    Unreachable,
}

impl Distance {
    pub fn finite(self) -> Option<usize> {
        match self {
            Distance::Finite(k) => Some(k),
            Distance::Unreachable => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Distance::Finite(_))
    }

    /// Whether this distance is at least the real radius `r`.
    pub fn at_least(self, r: f64) -> bool {
        match self {
            Distance::Finite(k) => k as f64 >= r,
            Distance::Unreachable => true,
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Finite(k) => write!(f, "{k}"),
            Distance::Unreachable => f.write_str("inf"),
        }
    }
}

/// Undirected simple graph on vertices `1..=d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    d: usize,
    edges: EdgeSet,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn empty(d: usize) -> Self {
        Graph { d, edges: EdgeSet::new(), adj: vec![Vec::new(); d] }
    }

    /// Builds a graph, rejecting out-of-range vertices and repeated edges.
    pub fn from_edges<I: IntoIterator<Item = Edge>>(d: usize, edges: I) -> Result<Self> {
        let mut g = Graph::empty(d);
        for e in edges {
            if !g.add_edge(e)? {
                return Err(GraphError::DuplicateEdge(e));
            }
        }
        Ok(g)
    }

    pub fn from_pairs(d: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let edges = pairs.iter().map(|&(a, b)| Edge::new(a, b)).collect::<Result<Vec<_>>>()?;
        Graph::from_edges(d, edges)
    }

    /// Path `1-2-...-d`.
    pub fn chain(d: usize) -> Self {
        let edges = (1..d).map(|j| edge(j, j + 1));
        Graph::from_edges(d, edges).expect("chain edges are valid")
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn edges(&self) -> &EdgeSet {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, e: Edge) -> bool {
        self.edges.contains(&e)
    }

    pub fn check_vertex(&self, v: usize) -> Result<()> {
        if v == 0 || v > self.d {
            return Err(GraphError::VertexOutOfRange { vertex: v, d: self.d });
        }
        Ok(())
    }

    /// Sorted neighbours of `v`. Panics if `v` is out of range.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v - 1]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v - 1].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Inserts `e`; returns `false` if it was already present.
    pub fn add_edge(&mut self, e: Edge) -> Result<bool> {
        e.check(self.d)?;
        if !self.edges.insert(e) {
            return Ok(false);
        }
        for (u, v) in [(e.lo, e.hi), (e.hi, e.lo)] {
            let list = &mut self.adj[u - 1];
            let pos = list.binary_search(&v).unwrap_err();
            list.insert(pos, v);
        }
        Ok(true)
    }

    pub fn remove_edge(&mut self, e: Edge) -> bool {
        if !self.edges.remove(&e) {
            return false;
        }
        for (u, v) in [(e.lo, e.hi), (e.hi, e.lo)] {
            let list = &mut self.adj[u - 1];
            if let Ok(pos) = list.binary_search(&v) {
                list.remove(pos);
            }
        }
        true
    }

    /// Copy of this graph with `extra` added (edges already present are kept once).
    pub fn with_edges(&self, extra: &EdgeSet) -> Result<Graph> {
        let mut g = self.clone();
        for e in extra {
            g.add_edge(e)?;
        }
        Ok(g)
    }

    pub fn without_edges(&self, removed: &EdgeSet) -> Graph {
        let mut g = self.clone();
        for e in removed {
            g.remove_edge(e);
        }
        g
    }

    /// Vertices touched by at least one edge, `V(E)`.
    pub fn support(&self) -> BTreeSet<usize> {
        self.edges.vertices()
    }

    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.d, self.d);
        for e in &self.edges {
            a[(e.lo - 1, e.hi - 1)] = 1.0;
            a[(e.hi - 1, e.lo - 1)] = 1.0;
        }
        a
    }

    /// BFS distances from `u` to every vertex (index `v - 1`).
    pub fn distances_from(&self, u: usize) -> Result<Vec<Distance>> {
        self.check_vertex(u)?;
        let mut dist = vec![Distance::Unreachable; self.d];
        dist[u - 1] = Distance::Finite(0);
        let mut queue = VecDeque::from([u]);
        while let Some(x) = queue.pop_front() {
            let next = match dist[x - 1] {
                Distance::Finite(k) => Distance::Finite(k + 1),
                Distance::Unreachable => unreachable!("queued vertices are reached"),
            };
            for &y in self.neighbors(x) {
                if dist[y - 1] == Distance::Unreachable {
                    dist[y - 1] = next;
                    queue.push_back(y);
                }
            }
        }
        Ok(dist)
    }

    pub fn geodesic_distance(&self, u: usize, v: usize) -> Result<Distance> {
        self.check_vertex(v)?;
        Ok(self.distances_from(u)?[v - 1])
    }

    /// Minimum endpoint distance between two vertex pairs; neither needs to
    /// be an edge of the graph.
    pub fn edge_predistance(&self, e: Edge, f: Edge) -> Result<Distance> {
        e.check(self.d)?;
        f.check(self.d)?;
        if e.shares_vertex(f) {
            return Ok(Distance::Finite(0));
        }
        let mut best = Distance::Unreachable;
        for u in e.endpoints() {
            let dist = self.distances_from(u)?;
            for v in f.endpoints() {
                best = best.min(dist[v - 1]);
            }
        }
        Ok(best)
    }

    pub fn edgeset_predistance(&self, s: &EdgeSet, t: &EdgeSet) -> Result<Distance> {
        if s.is_empty() || t.is_empty() {
            return Err(GraphError::EmptyEdgeSet);
        }
        Ok(self.distance_table().edgeset_predistance(s, t))
    }

    /// All-pairs distances, for repeated predistance queries.
    pub fn distance_table(&self) -> DistanceTable {
        let rows = (1..=self.d)
            .map(|u| self.distances_from(u).expect("vertex in range"))
            .collect();
        DistanceTable { rows }
    }

    /// Connected components, each sorted, ordered by smallest vertex.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.d];
        let mut blocks = Vec::new();
        for start in 1..=self.d {
            if label[start - 1] != usize::MAX {
                continue;
            }
            let id = blocks.len();
            let mut block = vec![start];
            label[start - 1] = id;
            let mut stack = vec![start];
            while let Some(x) = stack.pop() {
                for &y in self.neighbors(x) {
                    if label[y - 1] == usize::MAX {
                        label[y - 1] = id;
                        block.push(y);
                        stack.push(y);
                    }
                }
            }
            block.sort_unstable();
            blocks.push(block);
        }
        blocks
    }

    pub fn component_count(&self) -> usize {
        self.connected_components().len()
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }

    /// A forest has exactly `d - components` edges; anything more closes a cycle.
    pub fn has_cycle(&self) -> bool {
        self.edge_count() + self.component_count() > self.d
    }

    pub fn has_triangle(&self) -> bool {
        self.has_clique(3)
    }

    /// Whether some `s` vertices are pairwise adjacent. Exhaustive; meant for
    /// sparse graphs.
    pub fn has_clique(&self, s: usize) -> bool {
        fn grow(g: &Graph, clique: &mut Vec<usize>, candidates: &[usize], s: usize) -> bool {
            if clique.len() == s {
                return true;
            }
            for (i, &v) in candidates.iter().enumerate() {
                let rest: Vec<usize> =
                    candidates[i + 1..].iter().copied().filter(|&w| g.has_edge(edge(v, w))).collect();
                if clique.len() + 1 + rest.len() < s {
                    continue;
                }
                clique.push(v);
                if grow(g, clique, &rest, s) {
                    return true;
                }
                clique.pop();
            }
            false
        }
        if s <= 1 {
            return s == 0 || self.d > 0;
        }
        (1..=self.d).any(|v| {
            let higher: Vec<usize> = self.neighbors(v).iter().copied().filter(|&w| w > v).collect();
            grow(self, &mut vec![v], &higher, s)
        })
    }

    /// Whether a self-avoiding path with at least `len` edges exists.
    /// Exhaustive depth-first search; meant for sparse graphs.
    pub fn has_path_with_edges(&self, len: usize) -> bool {
        fn extend(g: &Graph, v: usize, depth: usize, len: usize, seen: &mut [bool]) -> bool {
            if depth >= len {
                return true;
            }
            for &w in g.neighbors(v) {
                if !seen[w - 1] {
                    seen[w - 1] = true;
                    let found = extend(g, w, depth + 1, len, seen);
                    seen[w - 1] = false;
                    if found {
                        return true;
                    }
                }
            }
            false
        }
        if len == 0 {
            return self.d > 0;
        }
        let mut seen = vec![false; self.d];
        (1..=self.d).any(|v| {
            seen[v - 1] = true;
            let found = extend(self, v, 0, len, &mut seen);
            seen[v - 1] = false;
            found
        })
    }

    /// Whether a simple cycle through exactly `len` vertices exists.
    pub fn has_cycle_of_length(&self, len: usize) -> bool {
        fn extend(g: &Graph, start: usize, v: usize, depth: usize, len: usize, seen: &mut [bool]) -> bool {
            if depth + 1 == len {
                return g.has_edge(edge(v, start));
            }
            for &w in g.neighbors(v) {
                if w > start && !seen[w - 1] {
                    seen[w - 1] = true;
                    let found = extend(g, start, w, depth + 1, len, seen);
                    seen[w - 1] = false;
                    if found {
                        return true;
                    }
                }
            }
            false
        }
        if len < 3 {
            return false;
        }
        let mut seen = vec![false; self.d];
        (1..=self.d).any(|v| {
            seen[v - 1] = true;
            let found = extend(self, v, v, 0, len, &mut seen);
            seen[v - 1] = false;
            found
        })
    }

    pub fn closed_walk_count(&self, k: usize) -> Result<u128> {
        WalkMatrix::from_graph(self).closed_walks(k)
    }
}

/// Precomputed all-pairs geodesic distances.
#[derive(Clone, Debug)]
pub struct DistanceTable {
    rows: Vec<Vec<Distance>>,
}

impl DistanceTable {
    pub fn vertex(&self, u: usize, v: usize) -> Distance {
        self.rows[u - 1][v - 1]
    }

    pub fn edge_predistance(&self, e: Edge, f: Edge) -> Distance {
        if e.shares_vertex(f) {
            return Distance::Finite(0);
        }
        let mut best = Distance::Unreachable;
        for u in e.endpoints() {
            for v in f.endpoints() {
                best = best.min(self.vertex(u, v));
            }
        }
        best
    }

    pub fn edgeset_predistance(&self, s: &EdgeSet, t: &EdgeSet) -> Distance {
        let mut best = Distance::Unreachable;
        for e in s {
            for f in t {
                best = best.min(self.edge_predistance(e, f));
                if best == Distance::Finite(0) {
                    return best;
                }
            }
        }
        best
    }
}

/// `{V(E0 ∪ S) ∩ V(T)} ∪ {V(E0 ∪ T) ∩ V(S)}` with `E0` the edges of `base`.
pub fn vertex_buffer(base: &Graph, s: &EdgeSet, t: &EdgeSet) -> BTreeSet<usize> {
    let base_support = base.support();
    let vs = s.vertices();
    let vt = t.vertices();
    let in_base_or = |v: &usize, extra: &BTreeSet<usize>| base_support.contains(v) || extra.contains(v);
    vt.iter()
        .filter(|v| in_base_or(v, &vs))
        .chain(vs.iter().filter(|v| in_base_or(v, &vt)))
        .copied()
        .collect()
}
