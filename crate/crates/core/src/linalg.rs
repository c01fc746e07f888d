//! Small dense linear-algebra helpers shared by the solvers.

use std::cmp::Ordering;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};

/// Relative tolerance under which two eigenvalues are treated as tied.
const EIGEN_TIE_TOL: f64 = 1e-12;

/// Flip `v` so that its largest-magnitude coordinate is positive.
pub fn canonical_sign(v: &mut DVector<f64>) {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best = i;
            best_abs = x.abs();
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order and eigenvectors in canonical sign.
///
/// Ties are ordered by comparing the sign-normalised eigenvectors
/// lexicographically, so the output is deterministic.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    // symmetrise to absorb rounding in the caller's product
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.amax().max(1e-300);

    let mut pairs: Vec<(f64, DVector<f64>)> = (0..n)
        .map(|i| {
            let mut v = eig.eigenvectors.column(i).into_owned();
            canonical_sign(&mut v);
            (eig.eigenvalues[i], v)
        })
        .collect();

    pairs.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= EIGEN_TIE_TOL * scale {
            for (x, y) in a.1.iter().zip(b.1.iter()) {
                match y.partial_cmp(x) {
                    Some(Ordering::Equal) | None => continue,
                    Some(o) => return o,
                }
            }
            Ordering::Equal
        } else {
            b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal)
        }
    });

    let values = DVector::from_iterator(n, pairs.iter().map(|p| p.0));
    let mut vectors = DMatrix::zeros(n, n);
    for (j, (_, v)) in pairs.iter().enumerate() {
        vectors.set_column(j, v);
    }
    (values, vectors)
}

/// Thin SVD `m = P diag(s) Qᵀ` with singular values descending.
/// Returns `(P, s, Q)`.
pub fn thin_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let svd = SVD::new(m.clone(), true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(Ordering::Equal)
    });
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let k = order.len();
    let mut p = DMatrix::zeros(u.nrows(), k);
    let mut q = DMatrix::zeros(v_t.ncols(), k);
    let mut s = DVector::zeros(k);
    for (j, &i) in order.iter().enumerate() {
        p.set_column(j, &u.column(i));
        q.set_column(j, &v_t.row(i).transpose());
        s[j] = svd.singular_values[i];
    }
    (p, s, q)
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    DVector::from_vec(s)
}

/// Numerical rank with relative threshold `rtol` on the largest singular value.
pub fn rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    let s = singular_values(m);
    if s.is_empty() || s[0] == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rtol * s[0]).count()
}

/// Solve `a x = b` for symmetric positive (semi)definite `a`.
///
/// Tries a plain Cholesky factorisation first; on failure a ridge of
/// `ridge` (growing tenfold per retry) is added to the diagonal.
pub fn solve_spd(a: &DMatrix<f64>, b: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    if let Some(ch) = Cholesky::new(a.clone()) {
        return ch.solve(b);
    }
    let base = if ridge > 0.0 {
        ridge
    } else {
        (a.trace().abs() / a.nrows().max(1) as f64).max(1e-300) * 1e-12
    };
    let mut r = base;
    for _ in 0..12 {
        let mut reg = a.clone();
        for i in 0..reg.nrows() {
            reg[(i, i)] += r;
        }
        if let Some(ch) = Cholesky::new(reg) {
            return ch.solve(b);
        }
        r *= 10.0;
    }
    // give up on definiteness: pseudo-inverse
    let pinv = a
        .clone()
        .pseudo_inverse(1e-12 * a.amax().max(1e-300))
        .expect("pseudo-inverse with non-negative epsilon");
    pinv * b
}

/// `a + tau * I`.
pub fn add_ridge(a: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let mut out = a.clone();
    for i in 0..out.nrows().min(out.ncols()) {
        out[(i, i)] += tau;
    }
    out
}

pub fn frobenius_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum()
}

/// Trace of `aᵀ b` without forming the product.
pub fn trace_at_b(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Columns of `m` that are identically zero.
pub fn zero_columns(m: &DMatrix<f64>) -> Vec<usize> {
    (0..m.ncols())
        .filter(|&j| m.column(j).iter().all(|&x| x == 0.0))
        .collect()
}

/// Keep only the listed columns, in the given order.
pub fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), cols.len());
    for (j, &c) in cols.iter().enumerate() {
        out.set_column(j, &m.column(c));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending_with_sign() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 3.0]);
        let (vals, vecs) = sym_eigen_sorted(&m);
        assert_eq!(vals.as_slice(), &[5.0, 3.0, 1.0]);
        assert!((vecs[(1, 0)] - 1.0).abs() < 1e-12);
        assert!((vecs[(2, 1)] - 1.0).abs() < 1e-12);
        assert!((vecs[(0, 2)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svd_reconstructs() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.5, -1.0, 0.0, 3.0]);
        let (p, s, q) = thin_svd(&m);
        let back = &p * DMatrix::from_diagonal(&s) * q.transpose();
        assert!((back - m).amax() < 1e-12);
        assert!(s[0] >= s[1]);
    }

    #[test]
    fn spd_solve_falls_back_on_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[2.0, 2.0]);
        let x = solve_spd(&a, &b, 1e-12);
        assert!(x.iter().all(|v| v.is_finite()));
        assert!(((&a * &x) - &b).amax() < 1e-6);
    }
}
