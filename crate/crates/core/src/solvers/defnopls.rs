use nalgebra::{DMatrix, DVector};

use super::popls::popls_quotient;
use super::starts::vector_starts;
use super::steps::{refit_loss, relevance_order, schur_deflate, unidim_w};
use super::{exhausted, finish_bank, prepare, SolverConfig, SolverOutput, SolverReport, StopReason};
use crate::dataset::{CenteredDataset, CovarianceSet};
use crate::error::{Error, Result};
use crate::filterbank::Method;
use crate::linalg::select_columns;
use crate::nnls::{nnls_normal, NnlsOptions};

/// Start vector for filter `j`: `e_j` when it sees the deflated
/// cross-covariance, otherwise the coordinate with the largest `‖Cᵀe_i‖`.
/// `None` once the deflated matrix is exhausted.
pub(crate) fn start_vector(c: &DMatrix<f64>, j: usize) -> Option<DVector<f64>> {
    let n = c.nrows();
    let row_norms: Vec<f64> = c.row_iter().map(|r| r.norm_squared()).collect();
    let top = row_norms
        .iter()
        .enumerate()
        .fold((0usize, 0.0f64), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    if top.1 == 0.0 {
        return None;
    }
    let i = if j < n && row_norms[j] > 0.0 { j } else { top.0 };
    let mut u = DVector::zeros(n);
    u[i] = 1.0;
    Some(u)
}

fn cosine(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let d = a.norm() * b.norm();
    if d == 0.0 {
        0.0
    } else {
        a.dot(b) / d
    }
}

/// Non-negative LS for a single right-hand side with Gram `cxx`.
fn nnls_vec(cov: &CovarianceSet, rhs: &DVector<f64>, tol: Option<f64>) -> Result<DVector<f64>> {
    let b = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
    let sol = nnls_normal(
        &cov.cxx,
        &b,
        NnlsOptions {
            kkt_tolerance: tol,
            ..Default::default()
        },
    )?;
    Ok(sol.x.column(0).into_owned())
}

struct Filter {
    u: DVector<f64>,
    w: DVector<f64>,
    iterations: usize,
    converged: bool,
}

/// Inner loop for one filter: alternate the unidimensional W-step and a
/// one-column NNLS U-step until the cosine between successive `u` exceeds
/// `1 − δ`.
fn extract_one(
    cov: &CovarianceSet,
    c: &DMatrix<f64>,
    start: DVector<f64>,
    delta: f64,
    max_iter: usize,
    tol: Option<f64>,
) -> Result<Option<Filter>> {
    let mut u = start;
    let mut w = match unidim_w(c, &u) {
        Ok(w) => w,
        Err(Error::Degenerate(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    for k in 1..=max_iter {
        if k > 1 {
            w = match unidim_w(c, &u) {
                Ok(w) => w,
                Err(Error::Degenerate(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
        }
        let u_next = nnls_vec(cov, &(c * &w), tol)?;
        if u_next.iter().all(|&v| v == 0.0) {
            return Ok(None);
        }
        let d_cos = cosine(&u_next, &u);
        u = u_next;
        if d_cos > 1.0 - delta {
            return Ok(Some(Filter {
                u,
                w,
                iterations: k,
                converged: true,
            }));
        }
    }
    Ok(Some(Filter {
        u,
        w,
        iterations: max_iter,
        converged: false,
    }))
}

/// Sequential design: one filter at a time, Schur-deflating `Cxy` after each.
///
/// The loss trajectory holds, after each filter, the objective of the bank
/// extracted so far with its least-squares regression matrix.
pub fn defnopls(d: &CenteredDataset, config: &SolverConfig) -> Result<SolverOutput> {
    let cov = prepare(d, config)?;
    let n = cov.n_inputs();
    let m = cov.n_targets();
    let n_f = config.n_f;
    let delta = config.delta.unwrap_or(1e-10);
    let c_norm = cov.cxy.norm();

    let mut report = SolverReport::new(Method::Defnopls);
    let mut u_mat = DMatrix::zeros(n, n_f);
    let mut w_mat = DMatrix::zeros(m, n_f);
    let mut c = cov.cxy.clone();
    report.stop_reason = StopReason::Tolerance;

    for j in 0..n_f {
        let live = !exhausted(&c, c_norm);
        let mut filter: Option<Filter> = None;
        let mut best_q = f64::NEG_INFINITY;
        if let Some(first) = start_vector(&c, j).filter(|_| live) {
            let seed = config.seed.wrapping_add(j as u64);
            for (i, s) in vector_starts(&cov.cxx, &c, first, config.starts, seed).into_iter().enumerate() {
                let Some(f) = extract_one(&cov, &c, s, delta, config.max_outer_iterations, config.kkt_tolerance)?
                else {
                    continue;
                };
                // what the filter explains of the current cross-covariance
                let q = popls_quotient(&cov.cxx, &c, &f.u, 0.0);
                if q > best_q * (1.0 + 1e-12) || filter.is_none() {
                    log::debug!("defnopls filter {j}: start {i} gives {q:e}");
                    best_q = q;
                    filter = Some(f);
                }
            }
        }
        let Some(f) = filter else {
            report.stop_reason = StopReason::DeflationExhausted;
            report.warn(format!(
                "cross-covariance exhausted after {j} of {n_f} filters"
            ));
            break;
        };
        report.outer_iterations += f.iterations;
        if !f.converged {
            report.warn(format!(
                "filter {j}: inner loop hit {} iterations without meeting the cosine test",
                config.max_outer_iterations
            ));
        }
        u_mat.set_column(j, &f.u);
        w_mat.set_column(j, &f.w);
        report.filters_extracted = j + 1;

        // residual relative to the matrix being deflated
        let before = c.norm();
        c = schur_deflate(&c, &f.u);
        let unit = &f.u / f.u.norm();
        let resid = (c.transpose() * &unit).amax();
        report
            .deflation_residuals
            .push(if before > 0.0 { resid / before } else { 0.0 });
        report
            .loss_trajectory
            .push(refit_loss(&cov, &u_mat.columns(0, j + 1).into_owned()));
    }

    let order = relevance_order(&cov, &u_mat);
    let u_mat = select_columns(&u_mat, &order);
    let w_mat = select_columns(&w_mat, &order);
    report.final_loss = refit_loss(&cov, &u_mat);
    report.degenerate_columns = crate::linalg::zero_columns(&u_mat);
    if report.filters_extracted == 0 {
        report.loss_trajectory.push(report.final_loss);
    }
    let bank = finish_bank(u_mat, Method::Defnopls, None)?;
    Ok(SolverOutput {
        bank,
        w: w_mat,
        report,
    })
}
