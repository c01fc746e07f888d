use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::thin_svd;

fn split_signs(v: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    (v.map(|x| x.max(0.0)), v.map(|x| (-x).max(0.0)))
}

/// NNDSVDa initialisation of a non-negative rank-`n_f` factorisation
/// `c ≈ u0 w0ᵀ`.
///
/// Each singular pair contributes the sign-consistent part (positive or
/// negated negative) with the larger norm product; columns past `min(n, m)`
/// and all remaining zeros are filled with the mean of `c`.
pub fn nndsvd_init(c: &DMatrix<f64>, n_f: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if c.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Precondition(
            "NNDSVD needs a finite non-negative matrix".into(),
        ));
    }
    if c.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("NNDSVD of a zero matrix".into()));
    }
    if n_f == 0 {
        return Err(Error::Config("n_f must be at least 1".into()));
    }
    let (n, m) = c.shape();
    let (p, s, q) = thin_svd(c);
    let k = s.len().min(n_f);
    let mut u0 = DMatrix::zeros(n, n_f);
    let mut w0 = DMatrix::zeros(m, n_f);

    for j in 0..k {
        let x = p.column(j).into_owned();
        let y = q.column(j).into_owned();
        if j == 0 {
            let r = s[0].sqrt();
            u0.set_column(0, &(x.abs() * r));
            w0.set_column(0, &(y.abs() * r));
            continue;
        }
        let (xp, xn) = split_signs(&x);
        let (yp, yn) = split_signs(&y);
        let mp = xp.norm() * yp.norm();
        let mn = xn.norm() * yn.norm();
        let (a, b, mass) = if mp > mn { (xp, yp, mp) } else { (xn, yn, mn) };
        if mass == 0.0 {
            continue;
        }
        let r = (s[j] * mass).sqrt();
        u0.set_column(j, &(&a / a.norm() * r));
        w0.set_column(j, &(&b / b.norm() * r));
    }

    let mean = c.mean();
    u0.apply(|v| {
        if *v == 0.0 {
            *v = mean
        }
    });
    w0.apply(|v| {
        if *v == 0.0 {
            *v = mean
        }
    });
    Ok((u0, w0))
}
