//! Non-negative least squares by block principal pivoting.
//!
//! Solves `min ‖b − a x‖²_F` subject to `x ≥ 0` for one or many right-hand
//! sides. The solver works on the normal equations `aᵀa`, `aᵀb`, which lets a
//! caller precompute the Gram matrix once and share it across independent
//! right-hand sides (the U-step does exactly this with `Cxx`).
//!
//! Pivoting follows the block exchange rule with a backup single-variable
//! rule: whenever the number of infeasible variables fails to decrease for
//! three consecutive block exchanges, only the infeasible variable with the
//! largest index is exchanged until the count drops again. This guarantees
//! finite termination.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::solve_spd;

/// Number of block exchanges allowed without progress before falling back to
/// the single-variable rule.
const BACKUP_BUDGET: usize = 3;

#[derive(Debug, Clone)]
pub struct NnlsProblem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl NnlsProblem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 || b.ncols() == 0 {
            return Err(Error::DimensionMismatch("empty NNLS problem".into()));
        }
        if a.nrows() != b.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "design has {} rows, right-hand side has {}",
                a.nrows(),
                b.nrows()
            )));
        }
        Ok(NnlsProblem { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// `‖b − a x‖²_F`.
    pub fn objective(&self, x: &DMatrix<f64>) -> f64 {
        crate::linalg::frobenius_sq(&(&self.b - &self.a * x))
    }
}

#[derive(Debug, Clone)]
pub struct NnlsSolution {
    /// `q × r`, elementwise non-negative with exact zeros on the active set.
    pub x: DMatrix<f64>,
    /// Largest KKT violation over all columns.
    pub kkt_residual: f64,
    /// Largest pivot-iteration count over all columns.
    pub iterations: usize,
    /// Design columns that were identically zero; their coefficients are 0.
    pub dropped_columns: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NnlsOptions {
    /// Defaults to `1e-10 · max(1, ‖aᵀb‖_∞)`.
    pub kkt_tolerance: Option<f64>,
    /// Defaults to `5 · q`.
    pub max_pivot_iterations: Option<usize>,
}

pub fn default_kkt_tolerance(atb: &DMatrix<f64>) -> f64 {
    1e-10 * atb.amax().max(1.0)
}

/// Solve an NNLS problem given in design form.
pub fn nnls_solve(problem: &NnlsProblem, kkt_tolerance: Option<f64>) -> Result<NnlsSolution> {
    let gram = problem.a.transpose() * &problem.a;
    let atb = problem.a.transpose() * &problem.b;
    nnls_normal(
        &gram,
        &atb,
        NnlsOptions {
            kkt_tolerance,
            ..Default::default()
        },
    )
}

/// Solve from precomputed normal equations `gram = aᵀa` (`q × q`) and
/// `atb = aᵀb` (`q × r`). Columns are solved independently.
pub fn nnls_normal(
    gram: &DMatrix<f64>,
    atb: &DMatrix<f64>,
    options: NnlsOptions,
) -> Result<NnlsSolution> {
    let q = gram.nrows();
    if gram.ncols() != q || atb.nrows() != q {
        return Err(Error::DimensionMismatch(format!(
            "gram is {}x{}, aᵀb is {}x{}",
            gram.nrows(),
            gram.ncols(),
            atb.nrows(),
            atb.ncols()
        )));
    }
    let tol = options
        .kkt_tolerance
        .unwrap_or_else(|| default_kkt_tolerance(atb));
    let max_iter = options.max_pivot_iterations.unwrap_or(5 * q).max(1);
    let dropped: Vec<usize> = (0..q).filter(|&i| gram[(i, i)] == 0.0).collect();
    let ridge = 1e-12 * gram.trace() / q as f64;

    let columns: Vec<ColumnResult> = (0..atb.ncols())
        .into_par_iter()
        .map(|j| {
            let rhs = atb.column(j).into_owned();
            solve_column(gram, &rhs, &dropped, tol, max_iter, ridge)
        })
        .collect();

    let mut x = DMatrix::zeros(q, atb.ncols());
    let mut iterations = 0;
    let mut kkt_residual: f64 = 0.0;
    let mut failed = Vec::new();
    for (j, col) in columns.into_iter().enumerate() {
        x.set_column(j, &col.x);
        iterations = iterations.max(col.iterations);
        kkt_residual = kkt_residual.max(col.kkt_residual);
        if !col.converged {
            failed.push(j);
        }
    }
    if !failed.is_empty() {
        return Err(Error::Convergence {
            message: format!(
                "NNLS pivoting did not terminate within {max_iter} iterations for column(s) {failed:?}"
            ),
            best: Some(Box::new(x)),
        });
    }
    Ok(NnlsSolution {
        x,
        kkt_residual,
        iterations,
        dropped_columns: dropped,
    })
}

struct ColumnResult {
    x: DVector<f64>,
    iterations: usize,
    kkt_residual: f64,
    converged: bool,
}

/// KKT violation of `x` for gradient `g = gram x − atb`.
fn kkt_violation(x: &DVector<f64>, g: &DVector<f64>) -> f64 {
    x.iter()
        .zip(g.iter())
        .map(|(&xi, &gi)| if xi > 0.0 { gi.abs() } else { (-gi).max(0.0) })
        .fold(0.0, f64::max)
}

fn solve_column(
    gram: &DMatrix<f64>,
    atb: &DVector<f64>,
    dropped: &[usize],
    tol: f64,
    max_iter: usize,
    ridge: f64,
) -> ColumnResult {
    let q = gram.nrows();
    let mut fixed = vec![false; q];
    for &i in dropped {
        fixed[i] = true;
    }
    // passive set F: coordinates allowed to be non-zero
    let mut passive = vec![false; q];
    let mut x = DVector::zeros(q);
    let mut y = -atb;
    let mut best_count = q + 1;
    let mut backup = BACKUP_BUDGET;
    let mut best_x = x.clone();
    let mut best_infeasible = usize::MAX;

    for iter in 1..=max_iter {
        let infeasible: Vec<usize> = (0..q)
            .filter(|&i| !fixed[i])
            .filter(|&i| if passive[i] { x[i] < 0.0 } else { y[i] < -tol })
            .collect();

        if infeasible.len() < best_infeasible {
            best_infeasible = infeasible.len();
            best_x = x.map(|v: f64| v.max(0.0));
        }
        if infeasible.is_empty() {
            let x = x.map(|v| v.max(0.0));
            let g = gram * &x - atb;
            return ColumnResult {
                kkt_residual: kkt_violation(&x, &g),
                x,
                iterations: iter,
                converged: true,
            };
        }

        if infeasible.len() < best_count {
            best_count = infeasible.len();
            backup = BACKUP_BUDGET;
            for &i in &infeasible {
                passive[i] = !passive[i];
            }
        } else if backup > 0 {
            backup -= 1;
            for &i in &infeasible {
                passive[i] = !passive[i];
            }
        } else {
            let i = *infeasible.last().expect("non-empty");
            passive[i] = !passive[i];
        }

        let free: Vec<usize> = (0..q).filter(|&i| passive[i]).collect();
        x.fill(0.0);
        if !free.is_empty() {
            let sub = gram.select_rows(&free).select_columns(&free);
            let rhs = DMatrix::from_iterator(free.len(), 1, free.iter().map(|&i| atb[i]));
            let sol = solve_spd(&sub, &rhs, ridge);
            for (k, &i) in free.iter().enumerate() {
                x[i] = sol[(k, 0)];
            }
        }
        y = gram * &x - atb;
        for &i in &free {
            y[i] = 0.0;
        }
    }

    let g = gram * &best_x - atb;
    ColumnResult {
        kkt_residual: kkt_violation(&best_x, &g),
        x: best_x,
        iterations: max_iter,
        converged: false,
    }
}
