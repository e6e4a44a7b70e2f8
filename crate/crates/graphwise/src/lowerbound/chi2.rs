use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{one_norm, spectral_radius, PairContext};
use super::{Divider, LowerBoundError, Result};
use crate::graphs::{Distance, EdgeSet, Graph, GraphError, WalkMatrix};
use crate::model::ModelClassParams;

/// Largest divider accepted by [`multi_edge_chi2_bound`], which visits every pair.
pub const MULTI_EDGE_PAIR_LIMIT: usize = 2_000;

/// Constants attached to each pair in the multi-edge bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundSetting {
    /// Buffer size times spectral norms; `K = 2‖A_{S,S'}‖₂`.
    S1,
    /// Buffer sides over the squared degree; `K = 2‖A_{S,S'}‖₁`.
    S2,
}

/// Counts `K_r` of unordered pairs `{S, S'}` at base predistance `r`. Self
/// pairs are included and sit at `r = 0`, so the counts sum to
/// `|C|(|C| - 1)/2 + |C|`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PredistanceHistogram {
    /// `finite[r]` is `K_r`.
    pub finite: Vec<u64>,
    pub unreachable: u64,
    pub self_pairs: u64,
}

impl PredistanceHistogram {
    pub fn total(&self) -> u64 {
        self.finite.iter().sum::<u64>() + self.unreachable
    }

    /// Number of ordered pairs at predistance `r`.
    fn ordered(&self, r: usize) -> u64 {
        let k = self.finite[r];
        if r == 0 {
            2 * (k - self.self_pairs) + self.self_pairs
        } else {
            2 * k
        }
    }
}

pub fn predistance_histogram(c: &Divider) -> Result<PredistanceHistogram> {
    if c.is_empty() {
        return Err(LowerBoundError::EmptyDivider);
    }
    let table = c.base().distance_table();
    let sets: Vec<EdgeSet> = c.sets().map(|s| s.into_owned()).collect();
    let rows: Vec<Vec<Distance>> = (0..sets.len())
        .into_par_iter()
        .map(|i| (i + 1..sets.len()).map(|j| table.edgeset_predistance(&sets[i], &sets[j])).collect())
        .collect();
    let mut h = PredistanceHistogram { finite: vec![sets.len() as u64], unreachable: 0, self_pairs: sets.len() as u64 };
    for dist in rows.into_iter().flatten() {
        match dist {
            Distance::Finite(r) => {
                if h.finite.len() <= r {
                    h.finite.resize(r + 1, 0);
                }
                h.finite[r] += 1;
            }
            Distance::Unreachable => h.unreachable += 1,
        }
    }
    Ok(h)
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && theta >= 0.0 {
        Ok(())
    } else {
        Err(LowerBoundError::InvalidArgument(format!("theta must be finite and nonnegative, got {theta}")))
    }
}

/// `1 - ½·sqrt(mean - 1)`, or `-∞` once the mean overflows.
fn risk_from_mean(mean: f64) -> f64 {
    if mean.is_finite() {
        1.0 - 0.5 * (mean - 1.0).max(0.0).sqrt()
    } else {
        f64::NEG_INFINITY
    }
}

/// Chi-square lower bound on the minimax risk for a single-edge divider:
///
/// `1 - ½·sqrt(|C|⁻² Σ_{e,e'} exp(n (Rθ)^{2d+2} / (d+1)) - 1)` with
/// `R = √2(‖A0‖₂ + 2)` and `d` the base predistance of `e, e'`. Unreachable
/// pairs contribute `exp(0)`. For a deletion divider the base is the
/// alternative graph and the same formula applies.
pub fn single_edge_chi2_bound(c: &Divider, theta: f64, n: usize, params: &ModelClassParams) -> Result<f64> {
    check_theta(theta)?;
    if !c.is_single_edge() {
        return Err(LowerBoundError::NotSingleEdge);
    }
    let a0 = c.base().adjacency_matrix();
    let limit = (1.0 - 1.0 / params.c) / (2f64.sqrt() * (one_norm(&a0) + 2.0));
    if theta > limit {
        return Err(LowerBoundError::ThetaTooLarge { theta, limit });
    }
    let r = 2f64.sqrt() * (spectral_radius(&a0)? + 2.0);
    let h = predistance_histogram(c)?;
    let len = c.len() as f64;
    let mut sum = h.unreachable as f64 * 2.0;
    for dist in 0..h.finite.len() {
        let pairs = h.ordered(dist) as f64;
        if pairs == 0.0 {
            continue;
        }
        let k = (dist + 1) as f64;
        let exponent = n as f64 * (r * theta).powf(2.0 * k) / k;
        sum += pairs * exponent.exp();
    }
    Ok(risk_from_mean(sum / (len * len)))
}

/// Chi-square lower bound for a multi-edge divider:
///
/// `1 - ½·sqrt(|C|⁻² Σ_{S,S'} exp(n(|S∩S'|θ² + H (Kθ)^{2m} / (2m))) - 1)`
/// with `m = max(d, 1) + 1`, `d` the base predistance of `S, S'`, and `H, K`
/// given by `setting`. Unreachable pairs contribute `exp(0)`. Requires
/// `θ < (1 - 1/C) / (2√2 ‖A_{S,S'}‖₁)` for every pair.
pub fn multi_edge_chi2_bound(
    c: &Divider,
    theta: f64,
    n: usize,
    params: &ModelClassParams,
    setting: BoundSetting,
) -> Result<f64> {
    check_theta(theta)?;
    let len = c.len();
    if len == 0 {
        return Err(LowerBoundError::EmptyDivider);
    }
    if len > MULTI_EDGE_PAIR_LIMIT {
        return Err(LowerBoundError::TooLarge { what: "multi-edge chi-square bound", len, limit: MULTI_EDGE_PAIR_LIMIT });
    }
    let base = c.base();
    let ctx = PairContext::new(base)?;
    let sets: Vec<EdgeSet> = c.sets().map(|s| s.into_owned()).collect();
    let sup = c.supports();
    let supports: Vec<_> = sets.iter().map(|s| sup.of(s)).collect();
    let own_norms: Vec<f64> = sets
        .iter()
        .map(|s| Graph::from_edges(base.d(), s.iter()).map_err(LowerBoundError::from).and_then(|g| spectral_radius(&g.adjacency_matrix())))
        .collect::<Result<_>>()?;

    let gamma = (0..len)
        .into_par_iter()
        .map(|i| (i..len).map(|j| ctx.pair_gamma(&sets[i], &sets[j])).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max);
    let limit = (1.0 - 1.0 / params.c) / (2.0 * 2f64.sqrt() * gamma);
    if theta >= limit && theta > 0.0 {
        return Err(LowerBoundError::ThetaTooLarge { theta, limit });
    }

    let table = base.distance_table();
    let nf = n as f64;
    let term = |i: usize, j: usize| -> Result<f64> {
        let (s, t) = (&sets[i], &sets[j]);
        let dist = match table.edgeset_predistance(s, t) {
            Distance::Finite(r) => r,
            Distance::Unreachable => return Ok(1.0),
        };
        let shared = s.intersection_len(t) as f64;
        let m = (dist.max(1) + 1) as f64;
        let (side_s, side_t) = sup.buffer_sides(&supports[i], &supports[j]);
        let (h, k) = match setting {
            BoundSetting::S1 => {
                let lambda = ctx.pair_lambda(s, t)?;
                let h = side_s.min(side_t) as f64 * own_norms[i] * own_norms[j] / (lambda * lambda);
                (h, 2.0 * lambda)
            }
            BoundSetting::S2 => {
                let g = ctx.pair_gamma(s, t);
                ((side_s * side_t) as f64 / (g * g), 2.0 * g)
            }
        };
        let exponent = nf * (shared * theta * theta + h * (k * theta).powf(2.0 * m) / (2.0 * m));
        Ok(exponent.exp())
    };
    // rows summed in index order for a thread-independent result
    let rows: Vec<f64> = (0..len)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut row = term(i, i)?;
            for j in i + 1..len {
                row += 2.0 * term(i, j)?;
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let sum: f64 = rows.iter().sum();
    let lf = len as f64;
    Ok(risk_from_mean(sum / (lf * lf)))
}

/// `Tr(A_{S,S'}^k) + Tr(A0^k) - Tr((A0 + A_S)^k) - Tr((A0 + A_S')^k)` with
/// exact integer walk counts. `A_{S,S'}` is the literal sum `A0 + A_S + A_S'`.
pub fn cancellation_gap(base: &Graph, s: &EdgeSet, t: &EdgeSet, k: usize) -> std::result::Result<i128, GraphError> {
    for e in s.iter().chain(t.iter()) {
        base.check_vertex(e.hi())?;
    }
    let a0 = WalkMatrix::from_graph(base);
    let with_s = a0.with_edges(s);
    let with_t = a0.with_edges(t);
    let both = with_s.with_edges(t);
    let overflow = || GraphError::WalkCountOverflow { k };
    let tr = |m: &WalkMatrix| -> std::result::Result<i128, GraphError> {
        i128::try_from(m.closed_walks(k)?).map_err(|_| overflow())
    };
    let plus = tr(&both)?.checked_add(tr(&a0)?).ok_or_else(overflow)?;
    let minus = tr(&with_s)?.checked_add(tr(&with_t)?).ok_or_else(overflow)?;
    plus.checked_sub(minus).ok_or_else(overflow)
}
