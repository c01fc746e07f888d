//! Supervised spectral datasets: target encoding, centering and sample
//! covariances.
//!
//! Matrices are stored variables-by-samples: `inputs` is `n × N`, `targets`
//! is `m × N`, so each column is one sample.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1-of-m encoding of integer class labels.
pub fn encode_targets(labels: &[i64], m: usize) -> Result<DMatrix<f64>> {
    let mut y = DMatrix::zeros(m, labels.len());
    for (i, &label) in labels.iter().enumerate() {
        if label < 0 || label as usize >= m {
            return Err(Error::InvalidLabel {
                index: i,
                label,
                classes: m,
            });
        }
        y[(label as usize, i)] = 1.0;
    }
    Ok(y)
}

/// Uncentered inputs and targets as supplied by the user.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawDataset {
    inputs: DMatrix<f64>,
    targets: DMatrix<f64>,
    class_labels: Option<Vec<usize>>,
}

impl RawDataset {
    /// Validates non-negative inputs and a shared sample count of at least two.
    pub fn new(inputs: DMatrix<f64>, targets: DMatrix<f64>) -> Result<Self> {
        if inputs.ncols() != targets.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "inputs have {} samples, targets have {}",
                inputs.ncols(),
                targets.ncols()
            )));
        }
        if inputs.ncols() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: inputs.ncols(),
            });
        }
        if inputs.nrows() == 0 || targets.nrows() == 0 {
            return Err(Error::DimensionMismatch(
                "inputs and targets need at least one row".into(),
            ));
        }
        if let Some((pos, v)) = inputs
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
        {
            let (r, c) = (pos % inputs.nrows(), pos / inputs.nrows());
            return Err(Error::Precondition(format!(
                "input entry ({r}, {c}) = {v} is not a finite non-negative value"
            )));
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("targets contain non-finite values".into()));
        }
        Ok(RawDataset {
            inputs,
            targets,
            class_labels: None,
        })
    }

    /// Builds a classification dataset with 1-of-m encoded targets.
    pub fn with_labels(inputs: DMatrix<f64>, labels: &[i64], classes: usize) -> Result<Self> {
        let targets = encode_targets(labels, classes)?;
        let mut ds = RawDataset::new(inputs, targets)?;
        ds.class_labels = Some(labels.iter().map(|&l| l as usize).collect());
        Ok(ds)
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn class_labels(&self) -> Option<&[usize]> {
        self.class_labels.as_deref()
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn n_targets(&self) -> usize {
        self.targets.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.inputs.ncols()
    }

    /// Column subset, preserving order. Used to form training partitions.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let inputs = crate::linalg::select_columns(&self.inputs, indices);
        let targets = crate::linalg::select_columns(&self.targets, indices);
        let mut ds = RawDataset::new(inputs, targets)?;
        ds.class_labels = self
            .class_labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Ok(ds)
    }
}

/// Mean-removed inputs and targets together with the removed means.
#[derive(Debug, Clone)]
pub struct CenteredDataset {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub mu_x: DVector<f64>,
    pub mu_y: DVector<f64>,
}

fn row_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.ncols() as f64;
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum() / n))
}

fn subtract_rows(m: &DMatrix<f64>, mu: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        col -= mu;
    }
    out
}

impl CenteredDataset {
    /// Centers arbitrary real matrices (no sign requirement on either).
    pub fn from_matrices(inputs: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<Self> {
        if inputs.ncols() != targets.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "inputs have {} samples, targets have {}",
                inputs.ncols(),
                targets.ncols()
            )));
        }
        if inputs.ncols() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: inputs.ncols(),
            });
        }
        let mu_x = row_means(inputs);
        let mu_y = row_means(targets);
        Ok(CenteredDataset {
            x: subtract_rows(inputs, &mu_x),
            y: subtract_rows(targets, &mu_y),
            mu_x,
            mu_y,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_targets(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.x.ncols()
    }
}

pub fn center(raw: &RawDataset) -> Result<CenteredDataset> {
    CenteredDataset::from_matrices(&raw.inputs, &raw.targets)
}

/// Unnormalised sample covariances: `cxx = X Xᵀ`, `cxy = X Yᵀ`, `cyy = Y Yᵀ`.
#[derive(Debug, Clone)]
pub struct CovarianceSet {
    pub cxx: DMatrix<f64>,
    pub cxy: DMatrix<f64>,
    pub cyy: DMatrix<f64>,
}

impl CovarianceSet {
    pub fn n_inputs(&self) -> usize {
        self.cxx.nrows()
    }

    pub fn n_targets(&self) -> usize {
        self.cyy.nrows()
    }

    /// Covariances of uncentered data (`X̄ X̄ᵀ` etc.), as used by the
    /// multiplicative-update solver.
    pub fn uncentered(raw: &RawDataset) -> Self {
        products(raw.inputs(), raw.targets())
    }
}

fn products(x: &DMatrix<f64>, y: &DMatrix<f64>) -> CovarianceSet {
    let xt = x.transpose();
    let cxx = x * &xt;
    let cxy = x * y.transpose();
    let cyy = y * y.transpose();
    CovarianceSet {
        cxx: symmetrize(cxx),
        cxy,
        cyy: symmetrize(cyy),
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

pub fn covariances(d: &CenteredDataset) -> CovarianceSet {
    products(&d.x, &d.y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_examples() {
        let y = encode_targets(&[0, 2, 1], 3).unwrap();
        assert_eq!(
            y,
            DMatrix::from_row_slice(3, 3, &[1., 0., 0., 0., 0., 1., 0., 1., 0.])
        );
        let y = encode_targets(&[0, 0], 1).unwrap();
        assert_eq!(y, DMatrix::from_element(1, 2, 1.0));
        match encode_targets(&[0, 3], 3) {
            Err(Error::InvalidLabel { index: 1, label: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn columns_sum_to_one() {
        let y = encode_targets(&[4, 1, 0, 2, 3, 3], 5).unwrap();
        for c in y.column_iter() {
            assert_eq!(c.sum(), 1.0);
        }
    }

    #[test]
    fn center_two_point() {
        let raw = RawDataset::new(
            DMatrix::from_row_slice(2, 2, &[1., 3., 2., 4.]),
            DMatrix::from_row_slice(1, 2, &[0., 1.]),
        )
        .unwrap();
        let c = center(&raw).unwrap();
        assert_eq!(c.mu_x.as_slice(), &[2., 3.]);
        assert_eq!(c.x, DMatrix::from_row_slice(2, 2, &[-1., 1., -1., 1.]));
    }

    #[test]
    fn center_constant_and_idempotent() {
        let raw = RawDataset::new(
            DMatrix::from_element(3, 5, 2.5),
            DMatrix::from_row_slice(1, 5, &[1., 0., 1., 0., 1.]),
        )
        .unwrap();
        let c = center(&raw).unwrap();
        assert!(c.x.iter().all(|&v| v == 0.0));
        assert!(c.mu_x.iter().all(|&v| v == 2.5));

        let raw = RawDataset::new(
            DMatrix::from_row_slice(2, 4, &[0.1, 0.7, 0.3, 0.9, 5., 1., 2., 0.]),
            DMatrix::from_row_slice(1, 4, &[1., 0., 1., 0.]),
        )
        .unwrap();
        let c = center(&raw).unwrap();
        let again = CenteredDataset::from_matrices(&c.x, &c.y).unwrap();
        assert!((&again.x - &c.x).amax() < 1e-15);
        let tol = 1e-9 * 4.0 * raw.inputs().amax();
        for r in c.x.row_iter() {
            assert!(r.sum().abs() <= tol);
        }
    }

    #[test]
    fn too_few_samples() {
        let err = RawDataset::new(DMatrix::from_element(2, 1, 1.0), DMatrix::from_element(1, 1, 1.0));
        assert!(matches!(err, Err(Error::InsufficientSamples { got: 1, .. })));
    }

    #[test]
    fn negative_input_rejected() {
        let err = RawDataset::new(
            DMatrix::from_row_slice(1, 2, &[1., -1.]),
            DMatrix::from_element(1, 2, 1.0),
        );
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn covariance_examples() {
        let d = CenteredDataset {
            x: DMatrix::from_row_slice(1, 2, &[1., -1.]),
            y: DMatrix::from_row_slice(1, 2, &[1., -1.]),
            mu_x: DVector::zeros(1),
            mu_y: DVector::zeros(1),
        };
        let c = covariances(&d);
        assert_eq!(c.cxx[(0, 0)], 2.0);
        assert_eq!(c.cxy[(0, 0)], 2.0);
        assert_eq!(c.cyy[(0, 0)], 2.0);

        let d = CenteredDataset {
            x: DMatrix::zeros(3, 4),
            y: DMatrix::from_row_slice(1, 4, &[1., -1., 1., -1.]),
            mu_x: DVector::zeros(3),
            mu_y: DVector::zeros(1),
        };
        let c = covariances(&d);
        assert!(c.cxx.iter().chain(c.cxy.iter()).all(|&v| v == 0.0));
    }
}
