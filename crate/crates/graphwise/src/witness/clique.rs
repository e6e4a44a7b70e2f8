use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::{Result, WitnessError};
use crate::estimation::empirical_covariance;
use crate::graphs::{Edge, EdgeSet, EdgeWeights, Graph, GraphError};
use crate::model::Dataset;

/// Largest number of vertex subsets the eigenvalue test will scan.
pub const MAX_CLIQUE_SUBSETS: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CliqueTest {
    pub s: usize,
    /// Smallest eigenvalue of `Σ̂_CC` over all `s`-subsets `C`.
    pub statistic: f64,
    /// 1-based vertices of the minimizing subset.
    pub subset: Vec<usize>,
    pub threshold: f64,
    pub reject: bool,
}

/// `ν = (1 - (√2 + 1)√((s log(ed/s) + log(2/α)) / n))²`, with the inner
/// factor floored at zero so that `ν` never grows with the deviation term.
pub fn clique_threshold(d: usize, s: usize, n: usize, alpha: f64) -> f64 {
    let (d, s, n) = (d as f64, s as f64, n as f64);
    let dev = (s * (std::f64::consts::E * d / s).ln() + (2.0 / alpha).ln()) / n;
    let base = 1.0 - (2f64.sqrt() + 1.0) * dev.sqrt();
    base.max(0.0).powi(2)
}

fn binomial(d: usize, s: usize) -> Option<u128> {
    let s = s.min(d - s);
    (0..s).try_fold(1u128, |acc, i| Some(acc.checked_mul((d - i) as u128)? / (i as u128 + 1)))
}

/// Rejects when the smallest `s`-subset eigenvalue of the sample covariance
/// falls below [`clique_threshold`].
pub fn clique_detection_test(x: &Dataset, s: usize, alpha: f64) -> Result<CliqueTest> {
    let d = x.d();
    if s < 2 || s > d {
        return Err(WitnessError::InvalidProperty { property: format!("clique({s})"), reason: format!("s must lie in 2..={d}") });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(WitnessError::InvalidProperty { property: format!("clique({s})"), reason: "alpha must lie in (0, 1)".into() });
    }
    let count = binomial(d, s).unwrap_or(u128::MAX);
    if count > MAX_CLIQUE_SUBSETS {
        return Err(WitnessError::TooManySubsets { count, cap: MAX_CLIQUE_SUBSETS });
    }
    let sigma = empirical_covariance(x);
    let (statistic, subset) = (0..=d - s)
        .into_par_iter()
        .map(|first| min_with_first(&sigma, first, s))
        .reduce(|| (f64::INFINITY, Vec::new()), |a, b| if b.0 < a.0 { b } else { a });
    if !statistic.is_finite() {
        return Err(WitnessError::Eigen);
    }
    let threshold = clique_threshold(d, s, x.n(), alpha);
    Ok(CliqueTest { s, statistic, subset: subset.iter().map(|v| v + 1).collect(), threshold, reject: statistic < threshold })
}

/// Minimum over subsets whose smallest element is `first`; ties keep the
/// lexicographically first subset.
fn min_with_first(sigma: &DMatrix<f64>, first: usize, s: usize) -> (f64, Vec<usize>) {
    let d = sigma.nrows();
    let mut idx: Vec<usize> = (first..first + s).collect();
    let mut best = (f64::INFINITY, Vec::new());
    loop {
        let sub = sigma.select_rows(idx.iter()).select_columns(idx.iter());
        let low = sub.symmetric_eigenvalues().min();
        if low < best.0 {
            best = (low, idx.clone());
        }
        // advance positions 1..s, keeping idx[0] fixed
        let mut k = s;
        while k > 1 && idx[k - 1] == d - s + k - 1 {
            k -= 1;
        }
        if k == 1 {
            return best;
        }
        idx[k - 1] += 1;
        for t in k..s {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

/// Heaviest-first insertion until an `s`-clique appears; that clique
/// maximizes its lightest edge. Among cliques completed by the same edge the
/// lexicographically smallest vertex set wins.
pub(super) fn greedy_clique(w: &EdgeWeights, s: usize) -> std::result::Result<EdgeSet, GraphError> {
    let d = w.d();
    if s < 2 || d < s {
        return Err(GraphError::TooFewVertices { needed: s.max(2), d });
    }
    let mut g = Graph::empty(d);
    for e in w.insertion_order() {
        let common: Vec<usize> = g.neighbors(e.lo()).iter().copied().filter(|&c| g.has_edge(pair(c, e.hi()))).collect();
        let mut chosen = Vec::new();
        if extend_clique(&g, &common, s - 2, &mut chosen) {
            let mut vertices = chosen;
            vertices.extend(e.endpoints());
            let mut out = EdgeSet::new();
            for (i, &a) in vertices.iter().enumerate() {
                for &b in &vertices[i + 1..] {
                    out.insert(pair(a, b));
                }
            }
            return Ok(out);
        }
        g.add_edge(e)?;
    }
    Err(GraphError::TooFewVertices { needed: s, d })
}

fn pair(a: usize, b: usize) -> Edge {
    Edge::new(a, b).expect("distinct vertices")
}

/// Picks `need` mutually adjacent vertices from `candidates` (sorted), the
/// lexicographically smallest choice first.
fn extend_clique(g: &Graph, candidates: &[usize], need: usize, chosen: &mut Vec<usize>) -> bool {
    if need == 0 {
        return true;
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    for (i, &v) in sorted.iter().enumerate() {
        if sorted.len() - i < need {
            break;
        }
        let rest: Vec<usize> = sorted[i + 1..].iter().copied().filter(|&u| g.has_edge(pair(u, v))).collect();
        chosen.push(v);
        if extend_clique(g, &rest, need - 1, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}
