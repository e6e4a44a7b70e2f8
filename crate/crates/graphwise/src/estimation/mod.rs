//! Empirical covariance, the CLIME precision estimator with cross-validated
//! tuning, and the debiased edge statistic.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix_io::{self, MatrixIoError};
use crate::model::Dataset;
use crate::seeds;

mod admm;
mod simplex;

/// Smallest `|Θ̂ᵀ_{*j} Σ̂_{*j}|` accepted by the debiasing step.
pub const MIN_DEBIAS_DENOMINATOR: f64 = 0.5;
/// Multipliers of `√(log d / n)` in the default cross-validation grid.
pub const DEFAULT_GRID_MULTIPLIERS: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 2.5];

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("covariance must be square and symmetric")]
    NotSymmetric,
    #[error("column {column}: constraint set is empty for lambda {lambda}")]
    InfeasibleColumn { column: usize, lambda: f64 },
    #[error("column {column}: solver did not converge within {iterations} iterations")]
    NotConverged { column: usize, iterations: usize },
    #[error("column {column}: solution misses the constraint by {excess:.3e}")]
    CertificateFailed { column: usize, excess: f64 },
    #[error("cross validation needs at least {folds} samples, got {n}")]
    TooFewSamples { n: usize, folds: usize },
    #[error("lambda grid is empty")]
    EmptyGrid,
    #[error("index ({j}, {k}) outside a {d}x{d} estimate")]
    IndexOutOfRange { j: usize, k: usize, d: usize },
    #[error("debiasing denominator for column {column} is {value:.4}, below {MIN_DEBIAS_DENOMINATOR} in magnitude")]
    UnstableDenominator { column: usize, value: f64 },
    #[error(transparent)]
    Io(#[from] MatrixIoError),
}

pub type Result<T> = std::result::Result<T, EstimationError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symmetrization {
    /// Keep whichever of `(j,k)` and `(k,j)` is smaller in magnitude.
    SmallerMagnitude,
    /// Average the two entries.
    Average,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClimeSolver {
    /// Dual simplex; exact up to floating point.
    Simplex,
    /// Linearized ADMM stopped at the configured tolerance.
    Admm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClimeConfig {
    pub lambda: f64,
    /// ADMM stopping tolerance and slack allowed by the feasibility certificate.
    pub tolerance: f64,
    /// Pivot (simplex) or iteration (ADMM) cap per column.
    pub max_iterations: usize,
    pub symmetrization: Symmetrization,
    pub solver: ClimeSolver,
}

impl ClimeConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        let cfg = ClimeConfig {
            lambda,
            tolerance: 1e-7,
            max_iterations: 50_000,
            symmetrization: Symmetrization::SmallerMagnitude,
            solver: ClimeSolver::Simplex,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_solver(mut self, solver: ClimeSolver) -> Self {
        self.solver = solver;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(EstimationError::InvalidConfig(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(EstimationError::InvalidConfig(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(EstimationError::InvalidConfig("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClimeDiagnostics {
    /// `‖Σ̂Θ̂ - I‖_max` of the column solutions before symmetrization.
    pub column_residual: f64,
    /// The same residual after symmetrization.
    pub symmetric_residual: f64,
    pub max_column_iterations: usize,
    pub total_iterations: usize,
    pub solver: ClimeSolver,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionEstimate {
    /// Symmetrized estimate.
    pub matrix: DMatrix<f64>,
    /// Column solutions before symmetrization.
    pub columns: DMatrix<f64>,
    pub lambda: f64,
    pub diagnostics: ClimeDiagnostics,
}

impl PrecisionEstimate {
    pub fn d(&self) -> usize {
        self.matrix.nrows()
    }

    /// Writes the symmetrized matrix; `.bin` selects the binary format.
    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(matrix_io::save(&self.matrix, path)?)
    }

    /// `key=value` lines describing the fit.
    pub fn record(&self) -> String {
        let dg = &self.diagnostics;
        let mut out = String::new();
        let _ = writeln!(out, "d={}", self.d());
        let _ = writeln!(out, "lambda={:?}", self.lambda);
        let _ = writeln!(out, "solver={:?}", dg.solver);
        let _ = writeln!(out, "column_residual={:?}", dg.column_residual);
        let _ = writeln!(out, "symmetric_residual={:?}", dg.symmetric_residual);
        let _ = writeln!(out, "max_column_iterations={}", dg.max_column_iterations);
        let _ = writeln!(out, "total_iterations={}", dg.total_iterations);
        out
    }
}

/// `XᵀX / n`, without centering.
pub fn empirical_covariance(x: &Dataset) -> DMatrix<f64> {
    let m = x.matrix();
    let mut s = m.transpose() * m;
    s /= x.n() as f64;
    // exact symmetry regardless of summation order
    for j in 0..s.ncols() {
        for k in j + 1..s.ncols() {
            let v = s[(j, k)];
            s[(k, j)] = v;
        }
    }
    s
}

/// `‖ΣΘ - I‖_max`.
pub fn constraint_residual(sigma: &DMatrix<f64>, theta: &DMatrix<f64>) -> f64 {
    let mut r = sigma * theta;
    for i in 0..r.nrows() {
        r[(i, i)] -= 1.0;
    }
    r.amax()
}

pub fn symmetrize(m: &DMatrix<f64>, rule: Symmetrization) -> DMatrix<f64> {
    let mut out = m.clone();
    for j in 0..m.ncols() {
        for k in j + 1..m.ncols() {
            let (a, b) = (m[(j, k)], m[(k, j)]);
            let v = match rule {
                Symmetrization::SmallerMagnitude => {
                    if a.abs() <= b.abs() {
                        a
                    } else {
                        b
                    }
                }
                Symmetrization::Average => 0.5 * (a + b),
            };
            out[(j, k)] = v;
            out[(k, j)] = v;
        }
    }
    out
}

/// Column-wise CLIME: column `j` solves `min ‖β‖₁` subject to
/// `‖Σβ - e_j‖∞ ≤ λ`, and every column is certified against the constraint
/// before symmetrization. `sigma` may be asymmetric at rounding level; it is
/// averaged with its transpose first. Columns are solved in parallel; the
/// result does not depend on the thread count.
pub fn clime(sigma: &DMatrix<f64>, cfg: &ClimeConfig) -> Result<PrecisionEstimate> {
    cfg.validate()?;
    let d = sigma.nrows();
    if d == 0 || sigma.ncols() != d || sigma.iter().any(|v| !v.is_finite()) {
        return Err(EstimationError::NotSymmetric);
    }
    let scale = sigma.amax().max(1.0);
    if (sigma - sigma.transpose()).amax() > 1e-10 * scale {
        return Err(EstimationError::NotSymmetric);
    }
    let sigma = &symmetrize(sigma, Symmetrization::Average);
    let spectral_sq = match cfg.solver {
        ClimeSolver::Admm => sigma.clone().symmetric_eigenvalues().amax().powi(2),
        ClimeSolver::Simplex => 0.0,
    };
    let solved: Vec<(DVector<f64>, usize)> = (0..d)
        .into_par_iter()
        .map(|j| solve_one(sigma, spectral_sq, j, cfg))
        .collect::<Result<_>>()?;
    let mut columns = DMatrix::zeros(d, d);
    let mut total_iterations = 0;
    let mut max_column_iterations = 0;
    for (j, (beta, it)) in solved.into_iter().enumerate() {
        columns.set_column(j, &beta);
        total_iterations += it;
        max_column_iterations = max_column_iterations.max(it);
    }
    let matrix = symmetrize(&columns, cfg.symmetrization);
    let diagnostics = ClimeDiagnostics {
        column_residual: constraint_residual(sigma, &columns),
        symmetric_residual: constraint_residual(sigma, &matrix),
        max_column_iterations,
        total_iterations,
        solver: cfg.solver,
    };
    Ok(PrecisionEstimate { matrix, columns, lambda: cfg.lambda, diagnostics })
}

fn solve_one(sigma: &DMatrix<f64>, spectral_sq: f64, j: usize, cfg: &ClimeConfig) -> Result<(DVector<f64>, usize)> {
    let (beta, iterations) = match cfg.solver {
        ClimeSolver::Simplex => match simplex::solve_column(sigma, j, cfg.lambda, cfg.max_iterations) {
            Ok(s) => (s.beta, s.iterations),
            Err(simplex::SimplexFailure::Infeasible) => {
                return Err(EstimationError::InfeasibleColumn { column: j, lambda: cfg.lambda })
            }
            Err(simplex::SimplexFailure::IterationLimit) => {
                return Err(EstimationError::NotConverged { column: j, iterations: cfg.max_iterations })
            }
        },
        ClimeSolver::Admm => {
            let s = admm::solve_column(sigma, spectral_sq, j, cfg.lambda, cfg.tolerance, cfg.max_iterations)
                .ok_or(EstimationError::NotConverged { column: j, iterations: cfg.max_iterations })?;
            (s.beta, s.iterations)
        }
    };
    let mut fitted = sigma * &beta;
    fitted[j] -= 1.0;
    let excess = fitted.amax() - cfg.lambda;
    if excess > cfg.tolerance {
        return Err(EstimationError::CertificateFailed { column: j, excess });
    }
    Ok((beta, iterations))
}

/// `multipliers · √(log d / n)`.
pub fn lambda_grid(d: usize, n: usize, multipliers: &[f64]) -> Vec<f64> {
    let scale = ((d as f64).ln() / n as f64).sqrt();
    multipliers.iter().map(|m| m * scale).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvResult {
    pub lambda: f64,
    /// Summed held-out risk per grid entry, in grid order.
    pub risks: Vec<f64>,
}

/// K-fold cross validation over `grid`: the risk of `λ` is
/// `Σ_k ‖Σ̂⁽ᵏ⁾ Θ̂_λ⁽⁻ᵏ⁾ - I‖_max`. Folds come from a seeded shuffle, row
/// `order[i]` going to fold `i mod K`. Ties keep the earlier grid entry. A
/// grid entry whose fit fails on some fold gets infinite risk.
pub fn cv_select_lambda(
    x: &Dataset,
    grid: &[f64],
    folds: usize,
    base: &ClimeConfig,
    seed: u64,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(EstimationError::EmptyGrid);
    }
    if folds < 2 {
        return Err(EstimationError::InvalidConfig("cross validation needs at least 2 folds".into()));
    }
    if x.n() < folds {
        return Err(EstimationError::TooFewSamples { n: x.n(), folds });
    }
    let mut order: Vec<usize> = (0..x.n()).collect();
    order.shuffle(&mut seeds::rng(seed));
    let mut split: Vec<(DMatrix<f64>, DMatrix<f64>)> = Vec::with_capacity(folds);
    for k in 0..folds {
        let held: Vec<usize> = order.iter().enumerate().filter(|(i, _)| i % folds == k).map(|(_, &r)| r).collect();
        let kept: Vec<usize> = order.iter().enumerate().filter(|(i, _)| i % folds != k).map(|(_, &r)| r).collect();
        let cov = |rows: &[usize]| {
            let sub = Dataset::new(x.matrix().select_rows(rows.iter())).expect("rows of a valid dataset");
            empirical_covariance(&sub)
        };
        split.push((cov(&held), cov(&kept)));
    }
    let mut risks = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let cfg = ClimeConfig { lambda, ..*base };
        cfg.validate()?;
        let mut risk = 0.0;
        for (held, kept) in &split {
            match clime(kept, &cfg) {
                Ok(est) => risk += constraint_residual(held, &est.matrix),
                Err(_) => {
                    risk = f64::INFINITY;
                    break;
                }
            }
        }
        risks.push(risk);
    }
    let best = (0..grid.len()).fold(0, |b, i| if risks[i] < risks[b] { i } else { b });
    Ok(CvResult { lambda: grid[best], risks })
}

/// `Θ̃_jk = Θ̂_jk - Θ̂ᵀ_{*j}(Σ̂Θ̂_{*k} - e_k) / (Θ̂ᵀ_{*j} Σ̂_{*j})`, with 0-based indices.
pub fn debias(sigma: &DMatrix<f64>, theta: &DMatrix<f64>, j: usize, k: usize) -> Result<f64> {
    let d = theta.nrows();
    if j >= d || k >= d {
        return Err(EstimationError::IndexOutOfRange { j, k, d });
    }
    let denom = debias_denominator(sigma, theta, j)?;
    let mut r = sigma * theta.column(k);
    r[k] -= 1.0;
    Ok(theta[(j, k)] - theta.column(j).dot(&r) / denom)
}

/// `δ_j = Θ̂ᵀ_{*j} Σ̂_{*j}` (0-based), rejected when too close to zero.
pub fn debias_denominator(sigma: &DMatrix<f64>, theta: &DMatrix<f64>, j: usize) -> Result<f64> {
    let d = theta.nrows();
    if j >= d {
        return Err(EstimationError::IndexOutOfRange { j, k: j, d });
    }
    let denom = theta.column(j).dot(&sigma.column(j));
    check_denominator(j, denom)?;
    Ok(denom)
}

/// All debiased entries at once: `Θ̂ - diag(1/δ) Θ̂ᵀ(Σ̂Θ̂ - I)` with
/// `δ_j = Θ̂ᵀ_{*j} Σ̂_{*j}`.
pub fn debias_matrix(sigma: &DMatrix<f64>, theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = theta.nrows();
    let mut residual = sigma * theta;
    for i in 0..d {
        residual[(i, i)] -= 1.0;
    }
    let correction = theta.transpose() * residual;
    let mut out = theta.clone();
    for j in 0..d {
        let denom = theta.column(j).dot(&sigma.column(j));
        check_denominator(j, denom)?;
        for k in 0..d {
            out[(j, k)] -= correction[(j, k)] / denom;
        }
    }
    Ok(out)
}

fn check_denominator(column: usize, value: f64) -> Result<()> {
    if value.abs() < MIN_DEBIAS_DENOMINATOR || !value.is_finite() {
        Err(EstimationError::UnstableDenominator { column, value })
    } else {
        Ok(())
    }
}

/// Measured `K` in `‖Θ̂ - Θ*‖_max ≤ K √(log d / n)`.
pub fn error_constant(estimate: &DMatrix<f64>, truth: &DMatrix<f64>, n: usize) -> f64 {
    let d = truth.nrows() as f64;
    (estimate - truth).amax() / (d.ln() / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::Graph;
    use crate::model::PrecisionModel;

    #[test]
    fn covariance_of_basis_rows() {
        let x = Dataset::new(DMatrix::identity(4, 4)).unwrap();
        assert_eq!(empirical_covariance(&x), DMatrix::identity(4, 4) / 4.0);
        let one = Dataset::new(DMatrix::from_row_slice(1, 3, &[1.0, -2.0, 0.5])).unwrap();
        let v = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert_eq!(empirical_covariance(&one), &v * v.transpose());
    }

    #[test]
    fn identity_sigma() {
        let sigma = DMatrix::identity(5, 5);
        let est = clime(&sigma, &ClimeConfig::new(0.1).unwrap()).unwrap();
        assert!((est.matrix - DMatrix::identity(5, 5) * 0.9).amax() < 1e-14);
        let zero = clime(&sigma, &ClimeConfig::new(1.0).unwrap()).unwrap();
        assert_eq!(zero.matrix, DMatrix::zeros(5, 5));
        let big = clime(&sigma, &ClimeConfig::new(3.0).unwrap()).unwrap();
        assert_eq!(big.matrix, DMatrix::zeros(5, 5));
    }

    #[test]
    fn admm_agrees_with_simplex() {
        let model = PrecisionModel::new(Graph::chain(6), 0.3).unwrap();
        let sigma = model.covariance().unwrap();
        let cfg = ClimeConfig::new(0.05).unwrap();
        let exact = clime(&sigma, &cfg).unwrap();
        let approx = clime(&sigma, &ClimeConfig { max_iterations: 500_000, ..cfg }.with_solver(ClimeSolver::Admm)).unwrap();
        assert!((exact.columns - approx.columns).amax() < 1e-4);
    }

    #[test]
    fn symmetrization_rules() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -0.2, 0.5, 2.0]);
        let s = symmetrize(&m, Symmetrization::SmallerMagnitude);
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[1.0, -0.2, -0.2, 2.0]));
        assert_eq!(symmetrize(&s, Symmetrization::SmallerMagnitude), s);
        let a = symmetrize(&m, Symmetrization::Average);
        assert!((a[(0, 1)] - 0.15).abs() < 1e-15);
    }

    #[test]
    fn debias_two_by_two_by_hand() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.2, 0.3, 0.3, 0.9]);
        let theta = DMatrix::from_row_slice(2, 2, &[0.8, -0.2, -0.2, 1.1]);
        // column j = 0, k = 1
        let (t00, t10, t01, t11) = (0.8, -0.2, -0.2, 1.1);
        let denom = t00 * 1.2 + t10 * 0.3;
        let r0 = 1.2 * t01 + 0.3 * t11;
        let r1 = 0.3 * t01 + 0.9 * t11 - 1.0;
        let expected = t01 - (t00 * r0 + t10 * r1) / denom;
        assert!((debias(&sigma, &theta, 0, 1).unwrap() - expected).abs() < 1e-15);
        let all = debias_matrix(&sigma, &theta).unwrap();
        assert!((all[(0, 1)] - expected).abs() < 1e-15);
    }

    #[test]
    fn debias_exact_inverse_is_identity_map() {
        let model = PrecisionModel::new(Graph::chain(5), 0.3).unwrap();
        let theta = model.matrix().clone();
        let sigma = model.covariance().unwrap();
        let out = debias_matrix(&sigma, &theta).unwrap();
        assert!((out - &theta).amax() < 1e-12);
    }

    #[test]
    fn debias_guard() {
        let sigma = DMatrix::identity(2, 2);
        let theta = DMatrix::identity(2, 2) * 0.3;
        assert!(matches!(debias(&sigma, &theta, 0, 1), Err(EstimationError::UnstableDenominator { column: 0, .. })));
        assert!(matches!(debias(&sigma, &theta, 0, 2), Err(EstimationError::IndexOutOfRange { .. })));
    }

    #[test]
    fn cv_prefers_small_lambda_on_identity_data() {
        let x = PrecisionModel::identity(5).sample(200, 4).unwrap();
        let base = ClimeConfig::new(1.0).unwrap();
        let cv = cv_select_lambda(&x, &[0.01, 10.0], 5, &base, 1).unwrap();
        assert_eq!(cv.lambda, 0.01);
        assert!(cv.risks[1] > 4.9 && cv.risks[0] < cv.risks[1]);
        assert_eq!(cv_select_lambda(&x, &[0.3], 5, &base, 1).unwrap().lambda, 0.3);
        let tiny = PrecisionModel::identity(3).sample(3, 4).unwrap();
        assert!(matches!(
            cv_select_lambda(&tiny, &[0.3], 5, &base, 1),
            Err(EstimationError::TooFewSamples { n: 3, folds: 5 })
        ));
    }
}
