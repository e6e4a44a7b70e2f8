//! Precision matrices `Θ = I + θA`, membership in the class `M(s)`, the
//! example graph families, and Gaussian sampling.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::graphs::{Edge, Graph, GraphError};
use crate::seeds;

mod dataset;
mod families;

pub use dataset::{Dataset, DatasetLoadError};
pub use families::{build_family, Family, FamilyKind};

/// Smallest eigenvalue accepted as positive definite.
pub const PD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid class parameters: {0}")]
    InvalidParams(String),
    #[error("signal strength must be finite and nonnegative, got {0}")]
    InvalidTheta(f64),
    #[error("matrix is not positive definite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("symmetric eigenvalue solver did not converge")]
    EigenFailure,
    #[error("Cholesky factorization failed")]
    FactorizationFailed,
    #[error("family {kind:?} needs {requirement}")]
    FamilyRequirement { kind: FamilyKind, requirement: String },
    #[error("dataset contains a non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("dataset must have at least one row and one column")]
    EmptyDataset,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Parameters of the class `M(s)`: column sparsity `s`, spectral bound `c`
/// and column ℓ1 bound `l`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModelClassParams {
    pub s: usize,
    pub c: f64,
    pub l: f64,
}

impl ModelClassParams {
    pub fn new(s: usize, c: f64, l: f64) -> Result<Self> {
        if s == 0 {
            return Err(ModelError::InvalidParams("s must be positive".into()));
        }
        if !(c >= 1.0 && l >= c && l.is_finite()) {
            return Err(ModelError::InvalidParams(format!("need 1 <= C <= L, got C={c}, L={l}")));
        }
        Ok(ModelClassParams { s, c, l })
    }
}

/// Outcome of [`PrecisionModel::check_membership`], with the computed values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MembershipReport {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub spectrum_ok: bool,
    pub max_column_l1: f64,
    pub l1_ok: bool,
    pub max_column_support: usize,
    pub support_ok: bool,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct PrecisionModel {
    theta: f64,
    base: Graph,
    matrix: DMatrix<f64>,
}

impl PrecisionModel {
    /// `Θ = I + θA` for the adjacency matrix `A` of `base`.
    pub fn new(base: Graph, theta: f64) -> Result<Self> {
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(ModelError::InvalidTheta(theta));
        }
        let d = base.d();
        let matrix = DMatrix::identity(d, d) + base.adjacency_matrix() * theta;
        ensure_positive_definite(&matrix)?;
        Ok(PrecisionModel { theta, base, matrix })
    }

    pub fn identity(d: usize) -> Self {
        PrecisionModel::new(Graph::empty(d), 0.0).expect("identity is positive definite")
    }

    /// Arbitrary symmetric positive definite precision matrix; the base graph
    /// is its off-diagonal support. `theta` is carried as a label only.
    pub fn from_matrix(matrix: DMatrix<f64>, theta: f64) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix != matrix.transpose() {
            return Err(ModelError::NotSymmetric);
        }
        ensure_positive_definite(&matrix)?;
        let d = matrix.nrows();
        let mut base = Graph::empty(d);
        for j in 0..d {
            for k in j + 1..d {
                if matrix[(j, k)] != 0.0 {
                    base.add_edge(Edge::new(j + 1, k + 1)?)?;
                }
            }
        }
        Ok(PrecisionModel { theta, base, matrix })
    }

    /// `I + θ(vvᵀ − I)` with `v` the indicator of `vertices`: the planted
    /// clique alternative of the eigenvalue test.
    pub fn planted_clique(d: usize, vertices: &[usize], theta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&theta) {
            return Err(ModelError::InvalidTheta(theta));
        }
        let mut v = DMatrix::zeros(d, 1);
        for &j in vertices {
            if j == 0 || j > d {
                return Err(GraphError::VertexOutOfRange { vertex: j, d }.into());
            }
            v[(j - 1, 0)] = 1.0;
        }
        let eye = DMatrix::<f64>::identity(d, d);
        let matrix = &eye + (&v * v.transpose() - &eye) * theta;
        PrecisionModel::from_matrix(matrix, theta)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn base(&self) -> &Graph {
        &self.base
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn d(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        Cholesky::new(self.matrix.clone()).map(|c| c.inverse()).ok_or(ModelError::FactorizationFailed)
    }

    pub fn check_membership(&self, p: &ModelClassParams) -> Result<MembershipReport> {
        let (min_eigenvalue, max_eigenvalue) = eigen_range(&self.matrix)?;
        let d = self.d();
        let mut max_column_l1: f64 = 0.0;
        let mut max_column_support = 0;
        for col in self.matrix.column_iter() {
            max_column_l1 = max_column_l1.max(col.iter().map(|x| x.abs()).sum());
            max_column_support = max_column_support.max(col.iter().filter(|x| **x != 0.0).count());
        }
        let spectrum_ok = min_eigenvalue >= 1.0 / p.c && max_eigenvalue <= p.c;
        let l1_ok = max_column_l1 <= p.l;
        let support_ok = max_column_support <= p.s && p.s <= d;
        Ok(MembershipReport {
            min_eigenvalue,
            max_eigenvalue,
            spectrum_ok,
            max_column_l1,
            l1_ok,
            max_column_support,
            support_ok,
            pass: spectrum_ok && l1_ok && support_ok,
        })
    }

    /// `n` draws from `N(0, Θ⁻¹)`: with `Θ = LLᵀ`, each row solves `Lᵀx = z`
    /// for a standard normal `z`. Deterministic given `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        let d = self.d();
        let chol = Cholesky::new(self.matrix.clone()).ok_or(ModelError::FactorizationFailed)?;
        let upper = chol.l().transpose();
        let mut rng = seeds::rng(seed);
        // column i holds observation i
        let mut z = DMatrix::<f64>::zeros(d, n);
        for i in 0..n {
            for j in 0..d {
                z[(j, i)] = StandardNormal.sample(&mut rng);
            }
        }
        if !upper.solve_upper_triangular_mut(&mut z) {
            return Err(ModelError::FactorizationFailed);
        }
        Dataset::new(z.transpose())
    }
}

pub(crate) fn eigen_range(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000).ok_or(ModelError::EigenFailure)?;
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(min.is_finite() && max.is_finite()) {
        return Err(ModelError::EigenFailure);
    }
    Ok((min, max))
}

fn ensure_positive_definite(m: &DMatrix<f64>) -> Result<()> {
    let (min_eigenvalue, _) = eigen_range(m)?;
    if min_eigenvalue <= PD_TOLERANCE {
        return Err(ModelError::NotPositiveDefinite { min_eigenvalue });
    }
    Ok(())
}
