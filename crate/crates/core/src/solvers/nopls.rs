use nalgebra::DMatrix;

use super::starts::matrix_starts;
use super::steps::{kronecker_init, procrustes_w, relevance_order, u_step_signed, w_step};
use super::{finish_bank, prepare, SolverConfig, SolverOutput, SolverReport, StopReason};
use crate::dataset::{CenteredDataset, CovarianceSet};
use crate::error::{Error, Result};
use crate::filterbank::{trace_loss, Method};
use crate::linalg::{frobenius_sq, select_columns, zero_columns};

#[derive(Clone, Copy, PartialEq)]
enum WRule {
    Eigen,
    Procrustes,
}

/// Joint design with eigendecomposition W-steps. Columns come out ordered by
/// the eigenvalues of the final W-step.
pub fn nopls(d: &CenteredDataset, config: &SolverConfig) -> Result<SolverOutput> {
    let cov = prepare(d, config)?;
    alternate(&cov, config, WRule::Eigen, Method::Nopls)
}

/// Joint design with orthogonal Procrustes W-steps. Requires `n_f ≤ m`.
pub fn pnopls(d: &CenteredDataset, config: &SolverConfig) -> Result<SolverOutput> {
    let cov = prepare(d, config)?;
    if config.n_f > cov.n_targets() {
        return Err(Error::Config(format!(
            "pnopls needs n_f ≤ m (got n_f = {}, m = {}): WᵀW = I is unattainable otherwise",
            config.n_f,
            cov.n_targets()
        )));
    }
    if cov.cxy.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("cross-covariance Cxy is zero".into()));
    }
    alternate(&cov, config, WRule::Procrustes, Method::Pnopls)
}

/// Pad an `m × k` matrix with zero columns up to `n_f`.
fn pad_columns(w: &DMatrix<f64>, n_f: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(w.nrows(), n_f);
    out.columns_mut(0, w.ncols()).copy_from(w);
    out
}

/// Exact W-step for fixed `U`: Procrustes on the (at most `m`) live columns,
/// zero-padded to `n_f`. `None` when `UᵀCxy` vanishes.
fn procrustes_step(cov: &CovarianceSet, u: &DMatrix<f64>) -> Result<Option<DMatrix<f64>>> {
    let k = u.ncols().min(cov.n_targets());
    let proj = u.columns(0, k).transpose() * &cov.cxy;
    match procrustes_w(&proj) {
        Ok(w) => Ok(Some(pad_columns(&w, u.ncols()))),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Stable sort of the columns by `uⱼᵀ Cxy wⱼ`, the loss reduction each
/// column contributes when `WᵀW = I`.
fn order_by_contribution(cov: &CovarianceSet, u: &mut DMatrix<f64>, w: &mut DMatrix<f64>) {
    let gain: Vec<f64> = (0..u.ncols())
        .map(|j| u.column(j).dot(&(&cov.cxy * w.column(j))))
        .collect();
    let mut order: Vec<usize> = (0..u.ncols()).collect();
    order.sort_by(|&a, &b| gain[b].total_cmp(&gain[a]));
    *u = select_columns(u, &order);
    *w = select_columns(w, &order);
}

fn alternate(
    cov: &CovarianceSet,
    config: &SolverConfig,
    rule: WRule,
    method: Method,
) -> Result<SolverOutput> {
    let starts = matrix_starts(&cov.cxx, &cov.cxy, config.n_f, config.starts, config.seed);
    let mut best: Option<(DMatrix<f64>, DMatrix<f64>, SolverReport)> = None;
    let mut first_err = None;
    for (i, u0) in starts.into_iter().enumerate() {
        match alternate_from(cov, config, rule, method, u0) {
            Ok((u, w, mut report)) => {
                report.chosen_start = i;
                let better = best.as_ref().is_none_or(|b| {
                    report.final_loss < b.2.final_loss - 1e-12 * b.2.final_loss.abs()
                });
                log::debug!("{method}: start {i} reached loss {:e}", report.final_loss);
                if better {
                    best = Some((u, w, report));
                }
            }
            Err(e @ Error::Degenerate(_)) => {
                first_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    let Some((mut u, mut w, mut report)) = best else {
        return Err(first_err.unwrap_or_else(|| Error::Degenerate("no usable start".into())));
    };
    if rule == WRule::Eigen {
        order_by_contribution(cov, &mut u, &mut w);
        let order = relevance_order(cov, &u);
        u = select_columns(&u, &order);
        w = select_columns(&w, &order);
    }
    if config.n_f > cov.n_targets() {
        report.padded_columns = zero_columns(&w);
    }
    report.degenerate_columns = zero_columns(&u);
    report.filters_extracted = config.n_f - report.degenerate_columns.len();
    let bank = finish_bank(u, method, None)?;
    Ok(SolverOutput { bank, w, report })
}

fn alternate_from(
    cov: &CovarianceSet,
    config: &SolverConfig,
    rule: WRule,
    method: Method,
    u0: DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, SolverReport)> {
    let m = cov.n_targets();
    let n_f = config.n_f;
    let mut report = SolverReport::new(method);

    let mut u = u0;
    let mut w = DMatrix::zeros(m, n_f);
    let mut delta = config.delta;
    let mut prev_stat: Option<f64> = None;
    let mut best: Option<(f64, DMatrix<f64>, DMatrix<f64>)> = None;
    let mut oscillation_flagged = false;
    report.stop_reason = StopReason::MaxIterations;

    for k in 1..=config.max_outer_iterations {
        report.outer_iterations = k;
        let (w_next, stat) = match rule {
            WRule::Eigen => {
                let e = w_step(cov, &u)?;
                (pad_columns(&e.w, n_f), e.lambda.sum())
            }
            WRule::Procrustes => {
                let proj = u.transpose() * &cov.cxy;
                let w = match procrustes_w(&proj) {
                    Ok(w) => w,
                    // projection of the start vectors missed Cxy entirely
                    Err(Error::Degenerate(_)) => kronecker_init(m, n_f),
                    Err(e) => return Err(e),
                };
                (w, frobenius_sq(&proj))
            }
        };
        report.eigenvalue_trace_trajectory.push(stat);

        let (mut u_next, mut w_signed) = u_step_signed(cov, &w_next, config.kkt_tolerance)?;
        let mut loss = trace_loss(cov, &u_next, &w_signed);
        // The eigenvectors span the right subspace but need not be the best
        // rotation for a non-negative U; fall back to the exact W-step when
        // the eigen step would undo progress.
        if rule == WRule::Eigen && report.loss_trajectory.last().is_some_and(|&p| loss > p) {
            if let Some(wp) = procrustes_step(cov, &u)? {
                let (uf, wf) = u_step_signed(cov, &wp, config.kkt_tolerance)?;
                let lf = trace_loss(cov, &uf, &wf);
                if lf < loss {
                    report.w_step_fallbacks += 1;
                    (u_next, w_signed, loss) = (uf, wf, lf);
                }
            }
        }
        report.loss_trajectory.push(loss);
        if best.as_ref().is_none_or(|b| loss < b.0) {
            best = Some((loss, u_next.clone(), w_signed.clone()));
        }
        u = u_next;
        w = w_signed;

        if u.iter().all(|&v| v == 0.0) {
            report.stop_reason = StopReason::Degenerate;
            report.warn("no filter explains any target variance");
            break;
        }

        if rule == WRule::Procrustes && !oscillation_flagged && k > 10 {
            let before = report.loss_trajectory[k - 11];
            if loss > before + 1e-6 * before.abs() {
                oscillation_flagged = true;
                report.warn(format!(
                    "loss rose from {before:e} to {loss:e} over 10 iterations (oscillation)"
                ));
            }
        }

        let tol = *delta.get_or_insert(1e-8 * stat);
        if let Some(p) = prev_stat {
            let diff = stat - p;
            if diff.abs() <= tol {
                if diff < 0.0 {
                    log::debug!("{method}: stopped on negative trace drift {diff:e}");
                }
                report.stop_reason = StopReason::Tolerance;
                break;
            }
        }
        prev_stat = Some(stat);
    }

    if report.stop_reason == StopReason::MaxIterations {
        report.warn(format!(
            "no convergence within {} outer iterations; returning best iterate",
            config.max_outer_iterations
        ));
        if let Some((_, bu, bw)) = best {
            u = bu;
            w = bw;
        }
    }
    if report.w_step_fallbacks > 0 {
        log::debug!("{method}: {} exact W-step fallbacks", report.w_step_fallbacks);
    }
    report.final_loss = trace_loss(cov, &u, &w);
    Ok((u, w, report))
}
