//! Multiplier bootstrap for debiased edge statistics and the step-down
//! multiple edge test.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{debias, debias_denominator, empirical_covariance, EstimationError};
use crate::graphs::{Edge, EdgeSet};
use crate::model::Dataset;
use crate::seeds;

/// Replications per parallel work unit. Fixed so that the matrix products,
/// and hence the bits of the output, do not depend on the thread count.
const REPLICATION_CHUNK: usize = 64;
pub const MIN_REPLICATIONS: usize = 100;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("invalid bootstrap configuration: {0}")]
    InvalidConfig(String),
    #[error("edge set is empty")]
    EmptyEdges,
    #[error("quantile subset is empty")]
    EmptySubset,
    #[error("edge {edge} lies outside dimension {d}")]
    EdgeOutOfRange { edge: Edge, d: usize },
    #[error("dataset has dimension {data} but the estimate has {estimate}")]
    DimensionMismatch { data: usize, estimate: usize },
    #[error("debiasing failed at edge {edge}: {source}")]
    Debias { edge: Edge, source: EstimationError },
}

pub type Result<T> = std::result::Result<T, InferenceError>;

/// Normalization of the bootstrap draw for edge `(j, k)`, `j < k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BootstrapScale {
    /// `n^{-1/2} Σ_i (Θ̂ᵀ_{*j} x_i x_iᵀ Θ̂_{*k} - Θ̂_jk) ζ_i` as written.
    Raw,
    /// The raw draw divided by `δ_j = Θ̂ᵀ_{*j} Σ̂_{*j}`, the denominator of the
    /// debiased statistic. Both agree once `Θ̂` is consistent; with a shrunk
    /// CLIME estimate the raw draws are too narrow by a factor near `δ_j`.
    Debiased,
}

impl std::str::FromStr for BootstrapScale {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "raw" => Ok(BootstrapScale::Raw),
            "debiased" => Ok(BootstrapScale::Debiased),
            other => Err(format!("unknown bootstrap scale {other:?} (raw or debiased)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replications: usize,
    pub alpha: f64,
    pub seed: u64,
    pub scale: BootstrapScale,
}

impl BootstrapConfig {
    /// Uses [`BootstrapScale::Debiased`].
    pub fn new(replications: usize, alpha: f64, seed: u64) -> Result<Self> {
        let cfg = BootstrapConfig { replications, alpha, seed, scale: BootstrapScale::Debiased };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_scale(mut self, scale: BootstrapScale) -> Self {
        self.scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < MIN_REPLICATIONS {
            return Err(InferenceError::InvalidConfig(format!(
                "need at least {MIN_REPLICATIONS} replications, got {}",
                self.replications
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(InferenceError::InvalidConfig(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// `B × m` matrix of bootstrap draws, one column per edge.
#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapMatrix {
    pub values: DMatrix<f64>,
}

impl BootstrapMatrix {
    pub fn replications(&self) -> usize {
        self.values.nrows()
    }

    /// Per replication, the largest `|W|` over `subset`.
    pub fn max_abs(&self, subset: &[usize]) -> Vec<f64> {
        (0..self.values.nrows())
            .map(|b| subset.iter().map(|&e| self.values[(b, e)].abs()).fold(0.0, f64::max))
            .collect()
    }
}

/// `n × m` products `(XΘ̂)_ij (XΘ̂)_ik - Θ̂_jk` for each edge `(j, k)`.
fn centered_products(x: &Dataset, theta: &DMatrix<f64>, edges: &[Edge]) -> DMatrix<f64> {
    let y = x.matrix() * theta;
    DMatrix::from_fn(x.n(), edges.len(), |i, e| {
        let (j, k) = (edges[e].lo() - 1, edges[e].hi() - 1);
        y[(i, j)] * y[(i, k)] - theta[(j, k)]
    })
}

fn check_inputs(x: &Dataset, theta: &DMatrix<f64>, edges: &EdgeSet) -> Result<Vec<Edge>> {
    if edges.is_empty() {
        return Err(InferenceError::EmptyEdges);
    }
    let d = theta.nrows();
    if x.d() != d {
        return Err(InferenceError::DimensionMismatch { data: x.d(), estimate: d });
    }
    for e in edges.iter() {
        if e.hi() > d {
            return Err(InferenceError::EdgeOutOfRange { edge: e, d });
        }
    }
    Ok(edges.to_vec())
}

/// `W_b,jk = n^{-1/2} Σ_i ((XΘ̂)_ij (XΘ̂)_ik - Θ̂_jk) ζ_bi` with standard normal
/// multipliers, rescaled per `cfg.scale`; replication `b` draws its
/// multipliers from `derive(seed, [b])`.
pub fn bootstrap_statistics(
    x: &Dataset,
    theta: &DMatrix<f64>,
    edges: &EdgeSet,
    cfg: &BootstrapConfig,
) -> Result<BootstrapMatrix> {
    cfg.validate()?;
    let edges = check_inputs(x, theta, edges)?;
    let mut products = centered_products(x, theta, &edges);
    if cfg.scale == BootstrapScale::Debiased {
        let sigma = empirical_covariance(x);
        for (col, &e) in edges.iter().enumerate() {
            let delta = debias_denominator(&sigma, theta, e.lo() - 1)
                .map_err(|source| InferenceError::Debias { edge: e, source })?;
            products.column_mut(col).unscale_mut(delta);
        }
    }
    let n = x.n();
    let scale = 1.0 / (n as f64).sqrt();
    let b_total = cfg.replications;
    let blocks: Vec<DMatrix<f64>> = (0..b_total.div_ceil(REPLICATION_CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * REPLICATION_CHUNK;
            let rows = REPLICATION_CHUNK.min(b_total - start);
            let mut z = DMatrix::<f64>::zeros(rows, n);
            for r in 0..rows {
                let mut rng = seeds::child_rng(cfg.seed, &[(start + r) as u64]);
                for i in 0..n {
                    z[(r, i)] = StandardNormal.sample(&mut rng);
                }
            }
            (z * &products) * scale
        })
        .collect();
    let mut values = DMatrix::zeros(b_total, edges.len());
    for (chunk, block) in blocks.into_iter().enumerate() {
        values.rows_mut(chunk * REPLICATION_CHUNK, block.nrows()).copy_from(&block);
    }
    Ok(BootstrapMatrix { values })
}

/// The `⌈(1 - α)B⌉`-th order statistic of the per-replication maxima of `|W|`
/// over `subset`.
pub fn bootstrap_quantile(stats: &BootstrapMatrix, subset: &[usize], alpha: f64) -> Result<f64> {
    if subset.is_empty() {
        return Err(InferenceError::EmptySubset);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(InferenceError::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut maxima = stats.max_abs(subset);
    let b = maxima.len();
    let rank = (((1.0 - alpha) * b as f64).ceil() as usize).clamp(1, b);
    let (_, q, _) = maxima.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*q)
}

/// Result of the step-down loop on frozen statistics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepDown {
    /// Indices into the edge list, in rejection order.
    pub rejected: Vec<usize>,
    /// Quantile used in each round.
    pub quantiles: Vec<f64>,
}

/// Rounds of `R = {e active : stat_e ≥ √n μ + c_{1-α, active}}` until `R` is
/// empty or nothing stays active. `scaled_stats[e]` is `√n |Θ̃_e|`.
pub fn step_down_frozen(
    scaled_stats: &[f64],
    boot: &BootstrapMatrix,
    alpha: f64,
    shift: f64,
) -> Result<StepDown> {
    let mut active: Vec<usize> = (0..scaled_stats.len()).collect();
    let mut rejected = Vec::new();
    let mut quantiles = Vec::new();
    while !active.is_empty() {
        let c = bootstrap_quantile(boot, &active, alpha)?;
        quantiles.push(c);
        let (hit, keep): (Vec<usize>, Vec<usize>) = active.iter().partition(|&&e| scaled_stats[e] >= shift + c);
        if hit.is_empty() {
            break;
        }
        rejected.extend(hit);
        active = keep;
    }
    Ok(StepDown { rejected, quantiles })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EdgeStatistic {
    pub edge: Edge,
    /// `√n |Θ̃_e|`.
    pub scaled: f64,
}

/// Outcome of a step-down test over a witness edge set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestOutcome {
    pub property: String,
    /// `true` iff every witness edge was rejected.
    pub reject: bool,
    pub alpha: f64,
    pub mu: f64,
    pub witness: EdgeSet,
    pub rejected: EdgeSet,
    pub statistics: Vec<EdgeStatistic>,
    pub rounds: usize,
    pub quantiles: Vec<f64>,
}

impl TestOutcome {
    /// Outcome for an empty witness: nothing to certify, so the rejected set
    /// equals the witness trivially.
    pub fn empty_witness(property: &str, alpha: f64, mu: f64) -> Self {
        TestOutcome {
            property: property.to_string(),
            reject: true,
            alpha,
            mu,
            witness: EdgeSet::new(),
            rejected: EdgeSet::new(),
            statistics: Vec::new(),
            rounds: 0,
            quantiles: Vec::new(),
        }
    }
}

/// Debiases `theta` against `x`, bootstraps the edges and runs the step-down
/// loop with rejection rule `√n|Θ̃_e| ≥ √n μ + c`. `mu = 0` is the plain test.
pub fn step_down(
    x: &Dataset,
    theta: &DMatrix<f64>,
    edges: &EdgeSet,
    cfg: &BootstrapConfig,
    mu: f64,
) -> Result<TestOutcome> {
    cfg.validate()?;
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(InferenceError::InvalidConfig(format!("mu must be finite and nonnegative, got {mu}")));
    }
    let list = check_inputs(x, theta, edges)?;
    let sigma = empirical_covariance(x);
    let root_n = (x.n() as f64).sqrt();
    let scaled = list
        .iter()
        .map(|&edge| {
            debias(&sigma, theta, edge.lo() - 1, edge.hi() - 1)
                .map(|v| root_n * v.abs())
                .map_err(|source| InferenceError::Debias { edge, source })
        })
        .collect::<Result<Vec<f64>>>()?;
    let boot = bootstrap_statistics(x, theta, edges, cfg)?;
    let sd = step_down_frozen(&scaled, &boot, cfg.alpha, root_n * mu)?;
    let rejected: EdgeSet = sd.rejected.iter().map(|&e| list[e]).collect();
    Ok(TestOutcome {
        property: "edges".to_string(),
        reject: rejected.len() == list.len(),
        alpha: cfg.alpha,
        mu,
        witness: edges.clone(),
        rejected,
        statistics: list.iter().zip(&scaled).map(|(&edge, &scaled)| EdgeStatistic { edge, scaled }).collect(),
        rounds: sd.quantiles.len(),
        quantiles: sd.quantiles,
    })
}
