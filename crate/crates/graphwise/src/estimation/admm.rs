//! Linearized ADMM for one CLIME column: `min ‖β‖₁` with `z = Σβ - e_j`
//! constrained to the box `[-λ, λ]`.

use nalgebra::{DMatrix, DVector};

pub(crate) struct AdmmSolution {
    pub beta: DVector<f64>,
    pub iterations: usize,
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

/// Stops once the primal residual `‖Σβ - e - z‖∞` and the dual residual
/// `ρ‖Σᵀ(z - z_prev)‖∞` are both below `tolerance`. `None` if
/// `max_iterations` is reached first.
pub(crate) fn solve_column(
    sigma: &DMatrix<f64>,
    spectral_sq: f64,
    j: usize,
    lambda: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Option<AdmmSolution> {
    let d = sigma.nrows();
    let rho = 1.0;
    let step = 1.0 / spectral_sq.max(f64::MIN_POSITIVE);
    let mut e = DVector::zeros(d);
    e[j] = 1.0;
    let mut beta = DVector::<f64>::zeros(d);
    let mut z: DVector<f64> = (-&e).map(|v: f64| v.clamp(-lambda, lambda));
    let mut w = DVector::<f64>::zeros(d);
    let mut fitted = DVector::<f64>::zeros(d);
    for it in 1..=max_iterations {
        let grad = sigma.transpose() * (&fitted - &e - &z + &w);
        for k in 0..d {
            beta[k] = soft_threshold(beta[k] - step * grad[k], step / rho);
        }
        fitted = sigma * &beta;
        let z_prev = z.clone();
        let shifted = &fitted - &e + &w;
        z = shifted.map(|v| v.clamp(-lambda, lambda));
        let primal = &fitted - &e - &z;
        w += &primal;
        let dual = (sigma.transpose() * (&z - &z_prev)) * rho;
        if primal.amax() <= tolerance && dual.amax() <= tolerance {
            return Some(AdmmSolution { beta, iterations: it });
        }
    }
    None
}
