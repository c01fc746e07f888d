use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{add_ridge, solve_spd};

/// One-vs-rest ridge regression on standardised features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// `m × n_f`, acting on standardised features.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub lambda: f64,
    pub feature_mean: DVector<f64>,
    /// Per-feature standard deviation (1 for constant features).
    pub feature_scale: DVector<f64>,
}

fn standardize(x: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let n = x.ncols() as f64;
    let mean = DVector::from_iterator(x.nrows(), x.row_iter().map(|r| r.sum() / n));
    let scale = DVector::from_iterator(
        x.nrows(),
        x.row_iter().zip(mean.iter()).map(|(r, &mu)| {
            let var = r.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
            let s = var.sqrt();
            if s > 1e-12 * mu.abs().max(1e-300) && s > 0.0 {
                s
            } else {
                1.0
            }
        }),
    );
    let z = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - mean[i]) / scale[i]);
    (z, mean, scale)
}

fn check_fit_inputs(features: &DMatrix<f64>, targets: &DMatrix<f64>, lambda: f64) -> Result<()> {
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("ridge lambda must be positive, got {lambda}")));
    }
    if features.ncols() != targets.ncols() || features.ncols() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{} feature columns vs {} target columns",
            features.ncols(),
            targets.ncols()
        )));
    }
    Ok(())
}

/// `W = Yc Zᵀ (Z Zᵀ + λ N I)⁻¹` on standardised features `Z`; the bias holds
/// the target means. `λ` is per sample, so the grid is independent of `N`.
pub fn ridge_fit(features: &DMatrix<f64>, targets: &DMatrix<f64>, lambda: f64) -> Result<LinearModel> {
    check_fit_inputs(features, targets, lambda)?;
    let (z, mean, scale) = standardize(features);
    let n = z.ncols() as f64;
    let y_mean = DVector::from_iterator(targets.nrows(), targets.row_iter().map(|r| r.sum() / n));
    let mut yc = targets.clone();
    for mut c in yc.column_iter_mut() {
        c -= &y_mean;
    }
    let gram = add_ridge(&(&z * z.transpose()), lambda * n);
    let rhs = &z * yc.transpose(); // n_f × m
    let weights = solve_spd(&gram, &rhs, 0.0).transpose();
    Ok(LinearModel {
        weights,
        bias: y_mean,
        lambda,
        feature_mean: mean,
        feature_scale: scale,
    })
}

/// The same estimator through an eigendecomposition of `Z Zᵀ`.
pub fn ridge_fit_eigen(
    features: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    lambda: f64,
) -> Result<LinearModel> {
    check_fit_inputs(features, targets, lambda)?;
    let (z, mean, scale) = standardize(features);
    let n = z.ncols() as f64;
    let y_mean = DVector::from_iterator(targets.nrows(), targets.row_iter().map(|r| r.sum() / n));
    let mut yc = targets.clone();
    for mut c in yc.column_iter_mut() {
        c -= &y_mean;
    }
    let eig = nalgebra::SymmetricEigen::new(&z * z.transpose());
    let v = &eig.eigenvectors;
    let inv = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / (l + lambda * n)));
    let weights = &yc * z.transpose() * v * inv * v.transpose();
    Ok(LinearModel {
        weights,
        bias: y_mean,
        lambda,
        feature_mean: mean,
        feature_scale: scale,
    })
}

impl LinearModel {
    pub fn scores(&self, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if features.nrows() != self.weights.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} features, got {}",
                self.weights.ncols(),
                features.nrows()
            )));
        }
        let z = DMatrix::from_fn(features.nrows(), features.ncols(), |i, j| {
            (features[(i, j)] - self.feature_mean[i]) / self.feature_scale[i]
        });
        let mut s = &self.weights * z;
        for mut c in s.column_iter_mut() {
            c += &self.bias;
        }
        Ok(s)
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in scores.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

pub fn predict(model: &LinearModel, features: &DMatrix<f64>) -> Result<Vec<usize>> {
    let s = model.scores(features)?;
    Ok(s.column_iter().map(|c| argmax(c.iter().copied())).collect())
}
