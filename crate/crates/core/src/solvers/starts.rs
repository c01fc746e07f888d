//! Initial points for the alternating and sequential solvers.
//!
//! The first start is always the coordinate (Kronecker) start. Extra starts
//! follow in a fixed order: non-negative parts of the leading singular
//! vectors of the cross-covariance, the coordinates that explain the most
//! target variance on their own, then seeded random non-negative points.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::steps::kronecker_init;
use crate::linalg::thin_svd;

/// The larger-norm sign part of `v`, normalised; `None` if `v` is zero.
pub(crate) fn sign_part(v: &DVector<f64>) -> Option<DVector<f64>> {
    let pos = v.map(|x| x.max(0.0));
    let neg = v.map(|x| (-x).max(0.0));
    let p = if pos.norm() >= neg.norm() { pos } else { neg };
    let norm = p.norm();
    (norm > 0.0).then(|| p / norm)
}

/// Coordinates ordered by `‖Cᵀe_i‖² / Cxx_ii`, best first; coordinates that
/// see nothing of `C` are left out.
pub(crate) fn ranked_coordinates(cxx: &DMatrix<f64>, c: &DMatrix<f64>) -> Vec<usize> {
    let mut scored: Vec<(usize, f64)> = (0..c.nrows())
        .filter_map(|i| {
            let num = c.row(i).norm_squared();
            let den = cxx[(i, i)];
            (num > 0.0 && den > 0.0).then_some((i, num / den))
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.into_iter().map(|(i, _)| i).collect()
}

fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[i] = 1.0;
    e
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let v = DVector::from_fn(n, |_, _| rng.random::<f64>() + 1e-12);
    let norm = v.norm();
    v / norm
}

/// Up to `count` start vectors for a single filter on cross-covariance `c`.
/// `first` is the caller's primary start.
pub(crate) fn vector_starts(
    cxx: &DMatrix<f64>,
    c: &DMatrix<f64>,
    first: DVector<f64>,
    count: usize,
    seed: u64,
) -> Vec<DVector<f64>> {
    let n = c.nrows();
    let mut out = vec![first];
    let push = |v: DVector<f64>, out: &mut Vec<DVector<f64>>| {
        if out.len() < count && !out.iter().any(|o| (o - &v).amax() < 1e-12) {
            out.push(v);
        }
    };
    let (p, s, _) = thin_svd(c);
    if !s.is_empty() && s[0] > 0.0 {
        if let Some(v) = sign_part(&p.column(0).into_owned()) {
            push(v, &mut out);
        }
    }
    for i in ranked_coordinates(cxx, c) {
        if out.len() >= count {
            break;
        }
        push(unit(n, i), &mut out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < count {
        out.push(random_unit(n, &mut rng));
    }
    out
}

/// Up to `count` start matrices (`n × n_f`) for the joint solvers.
pub(crate) fn matrix_starts(
    cxx: &DMatrix<f64>,
    cxy: &DMatrix<f64>,
    n_f: usize,
    count: usize,
    seed: u64,
) -> Vec<DMatrix<f64>> {
    let n = cxy.nrows();
    let mut out = vec![kronecker_init(n, n_f)];
    let ranked = ranked_coordinates(cxx, cxy);
    // leading singular directions, topped up with ranked coordinates
    if out.len() < count {
        let (p, s, _) = thin_svd(cxy);
        let mut cols: Vec<DVector<f64>> = (0..s.len())
            .filter(|&k| s[k] > 0.0)
            .filter_map(|k| sign_part(&p.column(k).into_owned()))
            .take(n_f)
            .collect();
        for &i in &ranked {
            if cols.len() >= n_f {
                break;
            }
            cols.push(unit(n, i));
        }
        if cols.len() == n_f {
            out.push(DMatrix::from_columns(&cols));
        }
    }
    if out.len() < count && ranked.len() >= n_f {
        let cols: Vec<DVector<f64>> = ranked.iter().take(n_f).map(|&i| unit(n, i)).collect();
        out.push(DMatrix::from_columns(&cols));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < count {
        let cols: Vec<DVector<f64>> = (0..n_f).map(|_| random_unit(n, &mut rng)).collect();
        out.push(DMatrix::from_columns(&cols));
    }
    out.truncate(count.max(1));
    out
}
