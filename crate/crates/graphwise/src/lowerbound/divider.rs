use std::borrow::Cow;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use super::{LowerBoundError, Result};
use crate::graphs::{Edge, EdgeSet, Graph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DividerMode {
    /// Adding any set to the null base yields an alternative graph.
    Add,
    /// Removing any set from the alternative base yields a null graph.
    Delete,
}

/// Which vertex buffer `V_{S,S'}` is attached to pairs of sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BufferRule {
    /// `{V(E0 ∪ S) ∩ V(S')} ∪ {V(E0 ∪ S') ∩ V(S)}`.
    Standard,
    /// `V(S) ∩ V(S')`; valid when every walk through both sets must share a
    /// vertex of both supports (star and subset families).
    SupportIntersection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubsetShape {
    /// All pairs of the chosen vertices.
    Clique,
    /// The chosen vertices joined in increasing order, closing back to the first.
    Cycle,
}

#[derive(Clone, Debug)]
enum Sets {
    Explicit(Vec<EdgeSet>),
    /// Every `s`-subset of `1..=d`, ranked lexicographically.
    Subsets { s: usize, shape: SubsetShape, count: usize },
}

/// A base graph plus a collection of edge sets.
#[derive(Clone, Debug)]
pub struct Divider {
    base: Graph,
    sets: Sets,
    mode: DividerMode,
    buffer_rule: BufferRule,
}

impl Divider {
    pub fn new(base: Graph, sets: Vec<EdgeSet>, mode: DividerMode) -> Result<Self> {
        for (i, s) in sets.iter().enumerate() {
            if s.is_empty() {
                return Err(LowerBoundError::InvalidDivider(format!("set {i} is empty")));
            }
            if s.max_vertex() > base.d() {
                return Err(LowerBoundError::InvalidDivider(format!("set {i} leaves 1..={}", base.d())));
            }
            let ok = match mode {
                DividerMode::Add => s.is_disjoint(base.edges()),
                DividerMode::Delete => s.is_subset(base.edges()),
            };
            if !ok {
                let why = match mode {
                    DividerMode::Add => "overlaps the null base",
                    DividerMode::Delete => "is not contained in the alternative base",
                };
                return Err(LowerBoundError::InvalidDivider(format!("set {i} {why}")));
            }
        }
        Ok(Divider { base, sets: Sets::Explicit(sets), mode, buffer_rule: BufferRule::Standard })
    }

    pub fn single_edge<I: IntoIterator<Item = Edge>>(base: Graph, edges: I, mode: DividerMode) -> Result<Self> {
        let sets = edges.into_iter().map(|e| std::iter::once(e).collect()).collect();
        Divider::new(base, sets, mode)
    }

    /// Every `s`-subset of `1..=d` shaped as a clique or cycle, over the
    /// empty base, with support-intersection buffers.
    pub fn all_subsets(d: usize, s: usize, shape: SubsetShape) -> Result<Self> {
        let min = match shape {
            SubsetShape::Clique => 2,
            SubsetShape::Cycle => 3,
        };
        if s < min || s > d {
            return Err(LowerBoundError::InvalidDivider(format!("subset size {s} must lie in {min}..={d}")));
        }
        let count = binomial(d, s)
            .and_then(|c| usize::try_from(c).ok())
            .ok_or_else(|| LowerBoundError::InvalidDivider(format!("C({d},{s}) is too large")))?;
        Ok(Divider {
            base: Graph::empty(d),
            sets: Sets::Subsets { s, shape, count },
            mode: DividerMode::Add,
            buffer_rule: BufferRule::SupportIntersection,
        })
    }

    pub fn with_buffer_rule(mut self, rule: BufferRule) -> Self {
        self.buffer_rule = rule;
        self
    }

    pub fn base(&self) -> &Graph {
        &self.base
    }

    pub fn d(&self) -> usize {
        self.base.d()
    }

    pub fn mode(&self) -> DividerMode {
        self.mode
    }

    pub fn buffer_rule(&self) -> BufferRule {
        self.buffer_rule
    }

    pub fn len(&self) -> usize {
        match &self.sets {
            Sets::Explicit(v) => v.len(),
            Sets::Subsets { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_single_edge(&self) -> bool {
        match &self.sets {
            Sets::Explicit(v) => v.iter().all(|s| s.len() == 1),
            Sets::Subsets { .. } => false,
        }
    }

    /// Set number `i`. Panics if `i >= len()`.
    pub fn set(&self, i: usize) -> Cow<'_, EdgeSet> {
        match &self.sets {
            Sets::Explicit(v) => Cow::Borrowed(&v[i]),
            Sets::Subsets { s, shape, count } => {
                assert!(i < *count, "set index {i} out of range");
                let vs = unrank_subset(i as u128, self.d(), *s);
                Cow::Owned(shaped_edges(&vs, *shape))
            }
        }
    }

    pub fn sets(&self) -> impl Iterator<Item = Cow<'_, EdgeSet>> + '_ {
        (0..self.len()).map(move |i| self.set(i))
    }

    /// Largest set size `U`.
    pub fn max_set_size(&self) -> usize {
        match &self.sets {
            Sets::Explicit(v) => v.iter().map(EdgeSet::len).max().unwrap_or(0),
            Sets::Subsets { s, shape: SubsetShape::Clique, .. } => s * (s - 1) / 2,
            Sets::Subsets { s, shape: SubsetShape::Cycle, .. } => *s,
        }
    }

    pub(crate) fn supports(&self) -> Supports {
        let d = self.d();
        let mut base = FixedBitSet::with_capacity(d + 1);
        for v in self.base.support() {
            base.insert(v);
        }
        Supports { base, rule: self.buffer_rule, d }
    }
}

/// Bitset view of vertex supports for fast buffer sizes.
pub(crate) struct Supports {
    base: FixedBitSet,
    rule: BufferRule,
    d: usize,
}

impl Supports {
    pub fn of(&self, s: &EdgeSet) -> FixedBitSet {
        let mut bits = FixedBitSet::with_capacity(self.d + 1);
        for v in s.iter().flat_map(Edge::endpoints) {
            bits.insert(v);
        }
        bits
    }

    /// `|V_{S,S'}|` from the two supports.
    pub fn buffer_len(&self, vs: &FixedBitSet, vt: &FixedBitSet) -> usize {
        let (s, t) = (vs.as_slice(), vt.as_slice());
        match self.rule {
            BufferRule::SupportIntersection => s.iter().zip(t).map(|(a, b)| (a & b).count_ones() as usize).sum(),
            BufferRule::Standard => {
                // (VS ∩ VT) ∪ (B ∩ (VS ∪ VT))
                let b = self.base.as_slice();
                (0..s.len()).map(|w| ((s[w] & t[w]) | (b[w] & (s[w] | t[w]))).count_ones() as usize).sum()
            }
        }
    }

    /// `(|V_{S,S'|S}|, |V_{S,S'|S'}|)`: buffer vertices on the side of each set.
    pub fn buffer_sides(&self, vs: &FixedBitSet, vt: &FixedBitSet) -> (usize, usize) {
        let (s, t) = (vs.as_slice(), vt.as_slice());
        match self.rule {
            BufferRule::SupportIntersection => {
                let k = self.buffer_len(vs, vt);
                (k, k)
            }
            BufferRule::Standard => {
                let b = self.base.as_slice();
                let side = |own: &[usize], other: &[usize]| -> usize {
                    (0..own.len()).map(|w| (own[w] & (b[w] | other[w])).count_ones() as usize).sum()
                };
                (side(s, t), side(t, s))
            }
        }
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(c)
}

/// The `rank`-th `s`-subset of `1..=d` in lexicographic order.
pub(crate) fn unrank_subset(mut rank: u128, d: usize, s: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(s);
    let mut next = 1;
    for left in (1..=s).rev() {
        loop {
            let with_next = binomial(d - next, left - 1).expect("fits: bounded by the total count");
            if rank < with_next {
                break;
            }
            rank -= with_next;
            next += 1;
        }
        out.push(next);
        next += 1;
    }
    out
}

fn shaped_edges(vs: &[usize], shape: SubsetShape) -> EdgeSet {
    match shape {
        SubsetShape::Clique => vs
            .iter()
            .enumerate()
            .flat_map(|(i, &a)| vs[i + 1..].iter().map(move |&b| Edge::new(a, b).expect("distinct")))
            .collect(),
        SubsetShape::Cycle => {
            (0..vs.len()).map(|i| Edge::new(vs[i], vs[(i + 1) % vs.len()]).expect("distinct")).collect()
        }
    }
}
