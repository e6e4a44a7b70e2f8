//! Dual simplex for one CLIME column:
//!
//! `min 1ᵀ(u + v)` subject to `Σ(u - v) ≤ λ + e_j`, `-Σ(u - v) ≤ λ - e_j`,
//! `u, v ≥ 0`. The all-slack basis has nonnegative reduced costs, so the
//! dual simplex starts from it directly.

use nalgebra::{DMatrix, DVector};

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Var {
    Pos(usize),
    Neg(usize),
    Slack(usize),
}

#[derive(Debug, PartialEq)]
pub(crate) enum SimplexFailure {
    Infeasible,
    IterationLimit,
}

pub(crate) struct ColumnSolution {
    pub beta: DVector<f64>,
    pub iterations: usize,
}

/// Dense tableau over the `u` columns and the slacks; each `v` column is the
/// negated `u` column and its reduced cost is `2 - d_u`.
struct Tableau {
    rows: usize,
    d: usize,
    width: usize,
    t: Vec<f64>,
    rhs: Vec<f64>,
    cost_pos: Vec<f64>,
    cost_slack: Vec<f64>,
    basis: Vec<Var>,
}

impl Tableau {
    fn new(sigma: &DMatrix<f64>, j: usize, lambda: f64) -> Self {
        let d = sigma.nrows();
        let rows = 2 * d;
        let width = d + rows;
        let mut t = vec![0.0; rows * width];
        for i in 0..d {
            for k in 0..d {
                t[i * width + k] = sigma[(i, k)];
                t[(d + i) * width + k] = -sigma[(i, k)];
            }
        }
        for r in 0..rows {
            t[r * width + d + r] = 1.0;
        }
        let mut rhs = vec![lambda; rows];
        rhs[j] += 1.0;
        rhs[d + j] -= 1.0;
        Tableau {
            rows,
            d,
            width,
            t,
            rhs,
            cost_pos: vec![1.0; d],
            cost_slack: vec![0.0; rows],
            basis: (0..rows).map(Var::Slack).collect(),
        }
    }

    fn entry(&self, r: usize, v: Var) -> f64 {
        match v {
            Var::Pos(k) => self.t[r * self.width + k],
            Var::Neg(k) => -self.t[r * self.width + k],
            Var::Slack(i) => self.t[r * self.width + self.d + i],
        }
    }

    fn reduced_cost(&self, v: Var) -> f64 {
        match v {
            Var::Pos(k) => self.cost_pos[k],
            Var::Neg(k) => 2.0 - self.cost_pos[k],
            Var::Slack(i) => self.cost_slack[i],
        }
    }

    fn leaving_row(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (r, &b) in self.rhs.iter().enumerate() {
            if b < -FEAS_TOL && best.is_none_or(|(_, v)| b < v) {
                best = Some((r, b));
            }
        }
        best.map(|(r, _)| r)
    }

    /// Dual ratio test on row `r`; ties go to the larger pivot magnitude.
    fn entering(&self, r: usize) -> Option<Var> {
        let candidates = (0..self.d)
            .flat_map(|k| [Var::Pos(k), Var::Neg(k)])
            .chain((0..self.rows).map(Var::Slack));
        let mut best: Option<(Var, f64, f64)> = None;
        for v in candidates {
            let a = self.entry(r, v);
            if a >= -PIVOT_TOL {
                continue;
            }
            let ratio = self.reduced_cost(v).max(0.0) / -a;
            let better = match best {
                None => true,
                Some((_, br, ba)) => ratio < br - 1e-14 || (ratio <= br + 1e-14 && -a > ba),
            };
            if better {
                best = Some((v, ratio, -a));
            }
        }
        best.map(|(v, _, _)| v)
    }

    fn pivot(&mut self, r: usize, v: Var) {
        let w = self.width;
        let col: Vec<f64> = (0..self.rows).map(|i| self.entry(i, v)).collect();
        let p = col[r];
        let mut pivot_row: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for x in &mut pivot_row {
            *x /= p;
        }
        let pivot_rhs = self.rhs[r] / p;
        self.t[r * w..(r + 1) * w].copy_from_slice(&pivot_row);
        self.rhs[r] = pivot_rhs;
        for (i, &f) in col.iter().enumerate() {
            if i == r || f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * w..(i + 1) * w];
            for (x, &p) in row.iter_mut().zip(&pivot_row) {
                *x -= f * p;
            }
            self.rhs[i] -= f * pivot_rhs;
        }
        let dc = self.reduced_cost(v);
        for k in 0..self.d {
            self.cost_pos[k] -= dc * pivot_row[k];
        }
        for i in 0..self.rows {
            self.cost_slack[i] -= dc * pivot_row[self.d + i];
        }
        self.basis[r] = v;
    }
}

pub(crate) fn solve_column(
    sigma: &DMatrix<f64>,
    j: usize,
    lambda: f64,
    max_iterations: usize,
) -> Result<ColumnSolution, SimplexFailure> {
    let mut tab = Tableau::new(sigma, j, lambda);
    let mut iterations = 0;
    while let Some(r) = tab.leaving_row() {
        if iterations >= max_iterations {
            return Err(SimplexFailure::IterationLimit);
        }
        let v = tab.entering(r).ok_or(SimplexFailure::Infeasible)?;
        tab.pivot(r, v);
        iterations += 1;
    }
    let beta = refine(sigma, j, lambda, &tab.basis).unwrap_or_else(|| {
        let mut beta = DVector::zeros(tab.d);
        for (r, v) in tab.basis.iter().enumerate() {
            match *v {
                Var::Pos(k) => beta[k] += tab.rhs[r],
                Var::Neg(k) => beta[k] -= tab.rhs[r],
                Var::Slack(_) => {}
            }
        }
        beta
    });
    Ok(ColumnSolution { beta, iterations })
}

/// Re-solves the final basis against the original constraint matrix to
/// strip accumulated pivoting error. `None` if the basis is singular or the
/// re-solved point leaves the nonnegative orthant.
fn refine(sigma: &DMatrix<f64>, j: usize, lambda: f64, basis: &[Var]) -> Option<DVector<f64>> {
    let d = sigma.nrows();
    let rows = 2 * d;
    let mut b = DMatrix::<f64>::zeros(rows, rows);
    for (c, v) in basis.iter().enumerate() {
        match *v {
            Var::Pos(k) | Var::Neg(k) => {
                let sign = if matches!(v, Var::Pos(_)) { 1.0 } else { -1.0 };
                for i in 0..d {
                    b[(i, c)] = sign * sigma[(i, k)];
                    b[(d + i, c)] = -sign * sigma[(i, k)];
                }
            }
            Var::Slack(i) => b[(i, c)] = 1.0,
        }
    }
    let mut rhs = DVector::from_element(rows, lambda);
    rhs[j] += 1.0;
    rhs[d + j] -= 1.0;
    let x = b.lu().solve(&rhs)?;
    if x.iter().any(|&v| !v.is_finite() || v < -1e-9) {
        return None;
    }
    let mut beta = DVector::zeros(d);
    for (c, v) in basis.iter().enumerate() {
        match *v {
            Var::Pos(k) => beta[k] += x[c].max(0.0),
            Var::Neg(k) => beta[k] -= x[c].max(0.0),
            Var::Slack(_) => {}
        }
    }
    Some(beta)
}
