use std::cmp::Ordering;

use nalgebra::DMatrix;

use super::{Edge, EdgeSet, GraphError, Result};

/// Symmetric nonnegative weights on the complete graph over `1..=d`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeWeights {
    d: usize,
    w: Vec<f64>,
}

impl EdgeWeights {
    pub fn from_fn<F: FnMut(Edge) -> f64>(d: usize, mut weight: F) -> Result<Self> {
        let mut w = vec![0.0; d * d];
        for a in 1..=d {
            for b in a + 1..=d {
                let e = Edge { lo: a, hi: b };
                let x = weight(e);
                if !x.is_finite() || x < 0.0 {
                    return Err(GraphError::InvalidWeight { edge: e, weight: x });
                }
                w[(a - 1) * d + (b - 1)] = x;
                w[(b - 1) * d + (a - 1)] = x;
            }
        }
        Ok(EdgeWeights { d, w })
    }

    /// Weights `|m[j,k]|` read from the upper triangle of a square matrix.
    pub fn from_abs_matrix(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(GraphError::NonSquareWeights { rows: m.nrows(), cols: m.ncols() });
        }
        EdgeWeights::from_fn(m.nrows(), |e| m[(e.lo - 1, e.hi - 1)].abs())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, e: Edge) -> f64 {
        self.w[(e.lo - 1) * self.d + (e.hi - 1)]
    }

    /// Heavier first; equal weights broken by the lexicographically smaller edge.
    pub fn compare(&self, a: Edge, b: Edge) -> Ordering {
        self.get(b).total_cmp(&self.get(a)).then(a.cmp(&b))
    }

    /// All edges of the complete graph in insertion order.
    pub fn insertion_order(&self) -> Vec<Edge> {
        let mut edges: Vec<Edge> = (1..=self.d)
            .flat_map(|a| (a + 1..=self.d).map(move |b| Edge { lo: a, hi: b }))
            .collect();
        edges.sort_by(|&a, &b| self.compare(a, b));
        edges
    }
}

/// Maximum-weight spanning tree of the complete graph by dense Prim.
///
/// Comparing edges with [`EdgeWeights::compare`] makes the order strict, so
/// the tree is unique and independent of the start vertex.
pub fn max_spanning_tree(w: &EdgeWeights) -> Result<EdgeSet> {
    let d = w.d;
    if d < 2 {
        return Err(GraphError::TooFewVertices { needed: 2, d });
    }
    let mut in_tree = vec![false; d + 1];
    let mut best: Vec<Option<Edge>> = vec![None; d + 1];
    in_tree[1] = true;
    for v in 2..=d {
        best[v] = Some(Edge { lo: 1, hi: v });
    }
    let mut tree = EdgeSet::new();
    for _ in 1..d {
        let (v, e) = (2..=d)
            .filter(|&v| !in_tree[v])
            .filter_map(|v| best[v].map(|e| (v, e)))
            .min_by(|a, b| w.compare(a.1, b.1))
            .expect("complete graph always has a crossing edge");
        in_tree[v] = true;
        tree.insert(e);
        for u in 2..=d {
            if in_tree[u] {
                continue;
            }
            let cand = Edge::new(u, v).expect("distinct vertices");
            let better = match best[u] {
                Some(cur) => w.compare(cand, cur) == Ordering::Less,
                None => true,
            };
            if better {
                best[u] = Some(cand);
            }
        }
    }
    Ok(tree)
}

/// The `d - m` heaviest edges of the maximum spanning tree: a maximum-weight
/// spanning forest with exactly `m` components.
pub fn max_spanning_forest(w: &EdgeWeights, m: usize) -> Result<EdgeSet> {
    let d = w.d;
    if m == 0 || m > d {
        return Err(GraphError::ComponentCountOutOfRange { m, d });
    }
    if m == d {
        return Ok(EdgeSet::new());
    }
    let mut edges = max_spanning_tree(w)?.to_vec();
    edges.sort_by(|&a, &b| w.compare(a, b));
    Ok(edges.into_iter().take(d - m).collect())
}
