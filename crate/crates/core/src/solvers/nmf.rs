use nalgebra::DMatrix;

use super::nndsvd::nndsvd_init;
use super::{SolverConfig, SolverReport, StopReason};
use crate::dataset::{CovarianceSet, RawDataset};
use crate::error::{Error, Result};
use crate::filterbank::{trace_loss, Method};
use crate::linalg::trace_at_b;

#[derive(Debug, Clone)]
pub struct NmfOutput {
    /// Bank, normalised to unit Frobenius norm, entries ≥ ε.
    pub u: DMatrix<f64>,
    /// Regression matrix, normalised to unit Frobenius norm, entries ≥ ε.
    pub w: DMatrix<f64>,
    /// Least-squares scale `α` so that `α·W Uᵀ X̄` best fits `Ȳ`.
    pub scale: f64,
    pub report: SolverReport,
}

/// Elementwise `max(ε, a ∘ num / den)`, with `0/0` read as 0.
fn floored_update(a: &DMatrix<f64>, num: &DMatrix<f64>, den: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
        let d = den[(i, j)];
        let ratio = if d > 0.0 { num[(i, j)] / d } else { 0.0 };
        (a[(i, j)] * ratio).max(eps)
    })
}

/// One pass of the floored multiplicative rules: `W` first, then `U` with the
/// new `W`. No normalisation.
pub(crate) fn mu_step(
    cov: &CovarianceSet,
    u: &DMatrix<f64>,
    w: &DMatrix<f64>,
    eps: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let gram_u = u.transpose() * &cov.cxx * u;
    let w_new = floored_update(w, &(cov.cxy.transpose() * u), &(w * gram_u), eps);
    let gram_w = w_new.transpose() * &w_new;
    let u_new = floored_update(u, &(&cov.cxy * &w_new), &(&cov.cxx * u * gram_w), eps);
    (u_new, w_new)
}

/// Loss of `α·W Uᵀ` with the optimal `α ≥ 0`, and that `α`.
fn scaled_loss(cov: &CovarianceSet, u: &DMatrix<f64>, w: &DMatrix<f64>) -> (f64, f64) {
    let cross = trace_at_b(w, &(cov.cxy.transpose() * u));
    let quad = trace_at_b(&(u.transpose() * &cov.cxx * u), &(w.transpose() * w));
    let alpha = if quad > 0.0 { (cross / quad).max(0.0) } else { 0.0 };
    (trace_loss(cov, u, &(w * alpha)), alpha)
}

fn normalize(a: &mut DMatrix<f64>) {
    let n = a.norm();
    if n > 0.0 {
        *a /= n;
    }
}

/// Multiplicative-update design on uncentered data, initialised by NNDSVDa
/// on `C_X̄Ȳ`.
pub fn nmf_opls(raw: &RawDataset, config: &SolverConfig) -> Result<NmfOutput> {
    config.validate(raw.n_inputs())?;
    if let Some(v) = raw.targets().iter().find(|&&v| v < 0.0) {
        return Err(Error::Precondition(format!(
            "multiplicative updates need non-negative targets, found {v}"
        )));
    }
    let cov = CovarianceSet::uncentered(raw);
    let eps = config.epsilon_floor;
    let delta = config.delta.unwrap_or(1e-9);
    let mut report = SolverReport::new(Method::NmfOpls);

    let (mut u, mut w) = nndsvd_init(&cov.cxy, config.n_f)?;
    u.apply(|v| *v = v.max(eps));
    w.apply(|v| *v = v.max(eps));
    normalize(&mut u);
    normalize(&mut w);
    let (initial, _) = scaled_loss(&cov, &u, &w);
    report.loss_trajectory.push(initial);
    report.stop_reason = StopReason::MaxIterations;

    for k in 1..=config.max_outer_iterations {
        report.outer_iterations = k;
        let (mut u_new, mut w_new) = mu_step(&cov, &u, &w, eps);
        normalize(&mut u_new);
        normalize(&mut w_new);
        // renormalising can push entries below the floor again
        u_new.apply(|v| *v = v.max(eps));
        w_new.apply(|v| *v = v.max(eps));
        let change = (&u_new - &u).norm();
        u = u_new;
        w = w_new;
        report.loss_trajectory.push(scaled_loss(&cov, &u, &w).0);
        // ‖U‖_F = 1 after normalisation, so δ is already relative
        if change <= delta * u.norm() {
            report.stop_reason = StopReason::Tolerance;
            break;
        }
    }
    if report.stop_reason == StopReason::MaxIterations {
        report.warn(format!(
            "no convergence within {} iterations",
            config.max_outer_iterations
        ));
    }
    let (loss, scale) = scaled_loss(&cov, &u, &w);
    report.final_loss = loss;
    report.filters_extracted = config.n_f;
    report.output_scale = Some(scale);
    Ok(NmfOutput {
        u,
        w,
        scale,
        report,
    })
}
