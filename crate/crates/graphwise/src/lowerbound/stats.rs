use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{buffer_entropy, BufferMethod, Divider, LowerBoundError, Result};
use crate::graphs::{EdgeSet, Graph};
use crate::seeds;

/// Largest divider whose pairs are enumerated exactly.
pub const EXACT_STATS_LIMIT: usize = 10_000;
/// Pairs drawn when the divider exceeds [`EXACT_STATS_LIMIT`].
pub const SAMPLED_STATS_PAIRS: usize = 100_000;

/// Pairwise statistics of `A_{S,S'} = A0 + A_S + A_S'` over a divider.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DividerStats {
    /// Largest set size.
    pub u: usize,
    /// Largest column absolute sum of `A_{S,S'}`.
    pub gamma: f64,
    /// Largest spectral norm of `A_{S,S'}`.
    pub lambda: f64,
    /// Largest `|S ∩ S'| / |V_{S,S'}|` over pairs with a nonempty buffer.
    pub edge_node_ratio: f64,
    /// `lambda^4 ∧ gamma^2 · max |V_{S,S'}|`.
    pub b: f64,
    /// Largest mean buffer size over a uniform second set.
    pub buffer_mean: f64,
    /// `false` when pairs were sampled rather than enumerated.
    pub exact: bool,
}

/// Computes [`DividerStats`]; dividers above [`EXACT_STATS_LIMIT`] sets use
/// [`SAMPLED_STATS_PAIRS`] random pairs (each with its self pair) drawn from seed 0.
pub fn divider_stats(c: &Divider) -> Result<DividerStats> {
    if c.is_empty() {
        return Err(LowerBoundError::EmptyDivider);
    }
    let ctx = PairContext::new(c.base())?;
    let sup = c.supports();
    let len = c.len();
    let exact = len <= EXACT_STATS_LIMIT;

    let partials: Vec<Partial> = if exact {
        let sets: Vec<EdgeSet> = c.sets().map(|s| s.into_owned()).collect();
        let supports: Vec<_> = sets.iter().map(|s| sup.of(s)).collect();
        (0..len)
            .into_par_iter()
            .map(|i| {
                let mut acc = Partial::new(ctx.base_radius);
                for j in i..len {
                    let buffer = sup.buffer_len(&supports[i], &supports[j]);
                    acc.visit(&ctx, &sets[i], &sets[j], buffer);
                }
                acc
            })
            .collect()
    } else {
        const CHUNK: usize = 1000;
        (0..SAMPLED_STATS_PAIRS.div_ceil(CHUNK))
            .into_par_iter()
            .map(|chunk| {
                let mut rng = seeds::child_rng(0, &[2, chunk as u64]);
                let mut acc = Partial::new(ctx.base_radius);
                for _ in 0..CHUNK {
                    let (i, j) = (rng.random_range(0..len), rng.random_range(0..len));
                    let (s, t) = (c.set(i), c.set(j));
                    let (vs, vt) = (sup.of(&s), sup.of(&t));
                    acc.visit(&ctx, &s, &s, sup.buffer_len(&vs, &vs));
                    acc.visit(&ctx, &s, &t, sup.buffer_len(&vs, &vt));
                }
                acc
            })
            .collect()
    };
    let total = partials.into_iter().fold(Partial::new(ctx.base_radius), Partial::merge);
    let buffer_mean = buffer_entropy(c, BufferMethod::Auto)?.max_mean;
    let gamma = total.gamma;
    let lambda = total.lambda;
    Ok(DividerStats {
        u: c.max_set_size(),
        gamma,
        lambda,
        edge_node_ratio: total.ratio,
        b: lambda.powi(4).min(gamma * gamma * total.max_buffer as f64),
        buffer_mean,
        exact,
    })
}

/// Base-graph data shared by all pairs.
pub(crate) struct PairContext<'a> {
    base: &'a Graph,
    component_of: Vec<usize>,
    components: Vec<Vec<usize>>,
    base_degree: usize,
    pub base_radius: f64,
}

impl<'a> PairContext<'a> {
    pub fn new(base: &'a Graph) -> Result<Self> {
        let components = base.connected_components();
        let mut component_of = vec![0; base.d() + 1];
        for (k, block) in components.iter().enumerate() {
            for &v in block {
                component_of[v] = k;
            }
        }
        let base_radius = if base.edge_count() == 0 { 0.0 } else { spectral_radius(&base.adjacency_matrix())? };
        Ok(PairContext { base, component_of, components, base_degree: base.max_degree(), base_radius })
    }

    /// `‖A_{S,S'}‖₁`: only degrees of touched vertices change.
    pub fn pair_gamma(&self, s: &EdgeSet, t: &EdgeSet) -> f64 {
        let mut extra = std::collections::BTreeMap::<usize, usize>::new();
        for e in s.iter().chain(t.iter()) {
            for v in e.endpoints() {
                *extra.entry(v).or_default() += 1;
            }
        }
        extra.iter().map(|(&v, &k)| self.base.degree(v) + k).max().unwrap_or(0).max(self.base_degree) as f64
    }

    /// `‖A_{S,S'}‖₂`: untouched base components are bounded by `‖A0‖₂`, so
    /// only the base components meeting `V(S) ∪ V(S')` need an eigensolve.
    pub fn pair_lambda(&self, s: &EdgeSet, t: &EdgeSet) -> Result<f64> {
        let touched: BTreeSet<usize> = s.iter().chain(t.iter()).flat_map(|e| e.endpoints()).collect();
        let blocks: BTreeSet<usize> = touched.iter().map(|&v| self.component_of[v]).collect();
        let vertices: Vec<usize> = blocks.iter().flat_map(|&k| self.components[k].iter().copied()).collect();
        let mut index = vec![usize::MAX; self.base.d() + 1];
        for (i, &v) in vertices.iter().enumerate() {
            index[v] = i;
        }
        let m = vertices.len();
        let mut a = DMatrix::<f64>::zeros(m, m);
        let edges = vertices
            .iter()
            .flat_map(|&v| self.base.neighbors(v).iter().filter(move |&&w| w > v).map(move |&w| (v, w)))
            .chain(s.iter().chain(t.iter()).map(|e| (e.lo(), e.hi())));
        for (v, w) in edges {
            let (i, j) = (index[v], index[w]);
            a[(i, j)] += 1.0;
            a[(j, i)] += 1.0;
        }
        Ok(spectral_radius(&a)?.max(self.base_radius))
    }
}

#[derive(Clone, Copy)]
struct Partial {
    gamma: f64,
    lambda: f64,
    ratio: f64,
    max_buffer: usize,
}

impl Partial {
    fn new(base_radius: f64) -> Self {
        Partial { gamma: 0.0, lambda: base_radius, ratio: 0.0, max_buffer: 0 }
    }

    fn visit(&mut self, ctx: &PairContext<'_>, s: &EdgeSet, t: &EdgeSet, buffer: usize) {
        let gamma = ctx.pair_gamma(s, t);
        self.gamma = self.gamma.max(gamma);
        // Λ_pair ≤ Γ_pair, so the eigensolve can only matter above the current best
        if gamma > self.lambda {
            let lambda = ctx.pair_lambda(s, t).expect("symmetric eigensolve of a finite matrix");
            self.lambda = self.lambda.max(lambda);
        }
        if buffer > 0 {
            self.ratio = self.ratio.max(s.intersection_len(t) as f64 / buffer as f64);
        }
        self.max_buffer = self.max_buffer.max(buffer);
    }

    fn merge(self, other: Partial) -> Partial {
        Partial {
            gamma: self.gamma.max(other.gamma),
            lambda: self.lambda.max(other.lambda),
            ratio: self.ratio.max(other.ratio),
            max_buffer: self.max_buffer.max(other.max_buffer),
        }
    }
}

/// Largest eigenvalue magnitude of a symmetric matrix.
pub(crate) fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let eig = a.clone().symmetric_eigenvalues();
    let r = eig.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if r.is_finite() {
        Ok(r)
    } else {
        Err(LowerBoundError::InvalidArgument("non-finite eigenvalue".into()))
    }
}

/// Largest column absolute sum.
pub(crate) fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowerbound::SubsetShape;
    use crate::model::{build_family, FamilyKind};

    /// Direct evaluation over all ordered pairs with full-size matrices.
    fn brute(c: &Divider) -> (f64, f64, f64, usize) {
        let a0 = c.base().adjacency_matrix();
        let mut out = (0.0f64, 0.0f64, 0.0f64, 0usize);
        for s in c.sets() {
            for t in c.sets() {
                let a = &a0 + Graph::from_edges(c.d(), s.iter()).unwrap().adjacency_matrix()
                    + Graph::from_edges(c.d(), t.iter()).unwrap().adjacency_matrix();
                out.0 = out.0.max(one_norm(&a));
                out.1 = out.1.max(spectral_radius(&a).unwrap());
                let v = crate::graphs::vertex_buffer(c.base(), &s, &t).len();
                if v > 0 {
                    out.2 = out.2.max(s.intersection_len(&t) as f64 / v as f64);
                }
                out.3 = out.3.max(v);
            }
        }
        out
    }

    #[test]
    fn matches_full_matrix_evaluation() {
        for kind in [
            FamilyKind::MaxDegreeBounded { s0: 3, s1: 5 },
            FamilyKind::Connectivity,
            FamilyKind::Cycle,
        ] {
            let f = build_family(kind, 18).unwrap();
            let st = divider_stats(&f.divider).unwrap();
            let (g, l, r, v) = brute(&f.divider);
            assert_eq!(st.gamma, g, "{kind:?}");
            assert!((st.lambda - l).abs() < 1e-9, "{kind:?}");
            assert_eq!(st.edge_node_ratio, r, "{kind:?}");
            assert!((st.b - l.powi(4).min(g * g * v as f64)).abs() < 1e-6);
            assert!(st.exact);
        }
    }

    #[test]
    fn single_edge_sets_have_u_one() {
        let f = build_family(FamilyKind::Cycle, 9).unwrap();
        assert_eq!(divider_stats(&f.divider).unwrap().u, 1);
    }

    #[test]
    fn cycle_subsets_within_stated_bounds() {
        let c = Divider::all_subsets(10, 4, SubsetShape::Cycle).unwrap();
        let st = divider_stats(&c).unwrap();
        assert_eq!(st.edge_node_ratio, 1.0);
        assert_eq!(st.gamma, 4.0);
        assert!(st.lambda <= st.gamma);
        // self pair: Λ = 4 and |V| = 4, so B = min(4^4, 4^2 · 4)
        assert_eq!(st.b, 64.0);
    }
}
