use nalgebra::DMatrix;

use super::FilterBank;
use crate::dataset::{CenteredDataset, CovarianceSet};
use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, trace_at_b};

/// `1e-10 · max|u|`: NNLS exact zeros and ε-floored entries both count as zero.
pub fn default_zero_threshold(bank: &FilterBank) -> f64 {
    1e-10 * bank.u.amax()
}

/// Fraction of coefficients whose magnitude exceeds `zero_threshold`.
pub fn nz_rate(bank: &FilterBank, zero_threshold: Option<f64>) -> f64 {
    let thr = zero_threshold.unwrap_or_else(|| default_zero_threshold(bank));
    let total = bank.u.len();
    if total == 0 {
        return 0.0;
    }
    let k = bank.u.iter().filter(|v| v.abs() > thr).count();
    k as f64 / total as f64
}

/// `IM = −log10(NZ) − log10(n_f / n_ref)`.
pub fn interpretability(nz: f64, n_f: usize, n_ref: usize) -> Result<f64> {
    if !(nz > 0.0 && nz <= 1.0) {
        return Err(Error::Precondition(format!(
            "non-zero rate must lie in (0, 1], got {nz}"
        )));
    }
    if n_f == 0 || n_ref == 0 {
        return Err(Error::Precondition("n_f and n_ref must be positive".into()));
    }
    // + 0.0 turns a negative zero into zero
    Ok(-nz.log10() - (n_f as f64 / n_ref as f64).log10() + 0.0)
}

/// `‖Y − W Uᵀ X‖²_F`, evaluated directly on the data.
pub fn reconstruction_loss(
    u: &DMatrix<f64>,
    w: &DMatrix<f64>,
    dataset: &CenteredDataset,
) -> Result<f64> {
    residual_loss(u, w, &dataset.x, &dataset.y)
}

/// Same loss on arbitrary (e.g. uncentered) matrices.
pub fn residual_loss(
    u: &DMatrix<f64>,
    w: &DMatrix<f64>,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<f64> {
    if u.nrows() != x.nrows() || w.nrows() != y.nrows() || u.ncols() != w.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "U is {}x{}, W is {}x{}, X has {} rows, Y has {} rows",
            u.nrows(),
            u.ncols(),
            w.nrows(),
            w.ncols(),
            x.nrows(),
            y.nrows()
        )));
    }
    let features = u.transpose() * x;
    Ok(frobenius_sq(&(y - w * features)))
}

/// The same loss expressed through covariances:
/// `Tr{Cyy} − 2 Tr{Wᵀ Cxyᵀ U} + Tr{Uᵀ Cxx U Wᵀ W}`.
pub fn trace_loss(cov: &CovarianceSet, u: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    let cross = cov.cxy.transpose() * u; // m × n_f
    let gram_u = u.transpose() * &cov.cxx * u;
    let gram_w = w.transpose() * w;
    cov.cyy.trace() - 2.0 * trace_at_b(w, &cross) + trace_at_b(&gram_u, &gram_w)
}
