use nalgebra::DMatrix;

use super::steps::{kronecker_init, refit_w, w_step};
use super::{prepare, SolverConfig, SolverReport, StopReason};
use crate::dataset::CenteredDataset;
use crate::error::{Error, Result};
use crate::filterbank::{trace_loss, Method};
use crate::linalg::{add_ridge, canonical_sign, solve_spd, sym_eigen_sorted, thin_svd};

/// Unconstrained design: the top-`n_f` generalised eigenvectors of
/// `(Cxy Cxyᵀ, Cxx + τI)` with the least-squares `W`.
pub fn opls_baseline(
    d: &CenteredDataset,
    config: &SolverConfig,
) -> Result<(DMatrix<f64>, DMatrix<f64>, SolverReport)> {
    let cov = prepare(d, config)?;
    let n = cov.n_inputs();
    let n_f = config.n_f;
    let tau = config.ridge_for(&cov.cxx);
    let mut report = SolverReport::new(Method::Opls);

    let mut b = add_ridge(&cov.cxx, tau);
    let mut chol = b.clone().cholesky();
    let mut extra = tau.max(1e-14 * cov.cxx.trace().abs().max(1e-300) / n as f64);
    while chol.is_none() {
        report.warn(format!("Cxx + τI not positive definite; adding ridge {extra:e}"));
        b = add_ridge(&cov.cxx, tau + extra);
        chol = b.clone().cholesky();
        extra *= 10.0;
        if extra > 1e300 {
            return Err(Error::Degenerate("could not regularise Cxx".into()));
        }
    }
    let chol = chol.expect("loop exits with a factor");
    let l = chol.l();
    let s = l
        .solve_lower_triangular(&cov.cxy)
        .ok_or_else(|| Error::Degenerate("singular Cholesky factor".into()))?;

    // eigenvectors of S Sᵀ: left singular vectors while they last
    let z = if n_f <= s.ncols().min(n) {
        thin_svd(&s).0.columns(0, n_f).into_owned()
    } else {
        sym_eigen_sorted(&(&s * s.transpose())).1.columns(0, n_f).into_owned()
    };
    let mut u = l
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::Degenerate("singular Cholesky factor".into()))?;
    for j in 0..u.ncols() {
        let mut v = u.column(j).into_owned();
        canonical_sign(&mut v);
        u.set_column(j, &v);
    }
    let w = refit_w(&cov, &u);
    report.final_loss = trace_loss(&cov, &u, &w);
    report.loss_trajectory.push(report.final_loss);
    report.outer_iterations = 1;
    report.filters_extracted = n_f;
    report.stop_reason = StopReason::Tolerance;
    Ok((u, w, report))
}

/// The NOPLS alternation with the sign constraint removed: eigen W-steps and
/// ridge-regularised least-squares U-steps. Converges to the same optimum as
/// [`opls_baseline`]; kept as a cross-check.
pub fn opls_unconstrained_alternation(
    d: &CenteredDataset,
    config: &SolverConfig,
) -> Result<(DMatrix<f64>, DMatrix<f64>, SolverReport)> {
    let cov = prepare(d, config)?;
    let n_f = config.n_f;
    let m = cov.n_targets();
    let tau = config.ridge_for(&cov.cxx);
    let b = add_ridge(&cov.cxx, tau);
    let mut report = SolverReport::new(Method::Opls);
    report.stop_reason = StopReason::MaxIterations;

    let mut u = kronecker_init(cov.n_inputs(), n_f);
    let mut w = DMatrix::zeros(m, n_f);
    let mut delta = config.delta;
    let mut prev: Option<f64> = None;
    for k in 1..=config.max_outer_iterations {
        report.outer_iterations = k;
        let e = w_step(&cov, &u)?;
        let stat = e.lambda.sum();
        report.eigenvalue_trace_trajectory.push(stat);
        w = DMatrix::zeros(m, n_f);
        w.columns_mut(0, e.w.ncols()).copy_from(&e.w);
        u = solve_spd(&b, &(&cov.cxy * &w), 0.0);
        report.loss_trajectory.push(trace_loss(&cov, &u, &w));
        if u.iter().all(|&v| v == 0.0) {
            report.stop_reason = StopReason::Degenerate;
            break;
        }
        let tol = *delta.get_or_insert(1e-8 * stat);
        if prev.is_some_and(|p| (stat - p).abs() <= tol) {
            report.stop_reason = StopReason::Tolerance;
            break;
        }
        prev = Some(stat);
    }
    report.final_loss = trace_loss(&cov, &u, &w);
    Ok((u, w, report))
}
