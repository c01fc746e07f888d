//! Building blocks shared by the alternating and sequential solvers.

use nalgebra::{DMatrix, DVector};

use crate::dataset::CovarianceSet;
use crate::error::{Error, Result};
use crate::filterbank::trace_loss;
use crate::linalg::{sym_eigen_sorted, thin_svd, zero_columns};
use crate::nnls::{nnls_normal, NnlsOptions};

/// Eigenvalues (descending) and orthonormal eigenvectors of `MᵀM`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: DVector<f64>,
    pub w: DMatrix<f64>,
}

/// `U⁽⁰⁾ = [e_1 … e_{n_f}]`.
pub fn kronecker_init(n: usize, n_f: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n_f, |i, j| if i == j { 1.0 } else { 0.0 })
}

/// Top `min(m, n_f)` eigenpairs of `(UᵀCxy)ᵀ(UᵀCxy)`, an `m × m` problem.
pub fn w_step(cov: &CovarianceSet, u: &DMatrix<f64>) -> Result<EigenPair> {
    if u.nrows() != cov.n_inputs() {
        return Err(Error::DimensionMismatch(format!(
            "U has {} rows, cxx is {}x{}",
            u.nrows(),
            cov.n_inputs(),
            cov.n_inputs()
        )));
    }
    if u.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("projection U is identically zero".into()));
    }
    let m = u.transpose() * &cov.cxy; // n_f × m
    let k = m.nrows().min(m.ncols());
    let (vals, vecs) = sym_eigen_sorted(&(m.transpose() * &m));
    Ok(EigenPair {
        lambda: DVector::from_iterator(k, vals.iter().take(k).map(|v| v.max(0.0))),
        w: vecs.columns(0, k).into_owned(),
    })
}

fn check_diagonal_gram(w: &DMatrix<f64>) -> Result<DVector<f64>> {
    let g = w.transpose() * w;
    let scale = g.diagonal().amax().max(1.0);
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            if i != j && g[(i, j)].abs() > 1e-8 * scale {
                return Err(Error::Precondition(format!(
                    "WᵀW is not diagonal: entry ({i}, {j}) = {:e}",
                    g[(i, j)]
                )));
            }
        }
    }
    Ok(g.diagonal())
}

/// Right-hand sides `Cxy wⱼ / ‖wⱼ‖²` of the per-column NNLS problems (zero for
/// zero columns).
fn u_step_rhs(cov: &CovarianceSet, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if w.nrows() != cov.n_targets() {
        return Err(Error::DimensionMismatch(format!(
            "W has {} rows, there are {} targets",
            w.nrows(),
            cov.n_targets()
        )));
    }
    let d = check_diagonal_gram(w)?;
    let mut rhs = &cov.cxy * w;
    for (j, mut col) in rhs.column_iter_mut().enumerate() {
        if d[j] > 0.0 {
            col /= d[j];
        } else {
            col.fill(0.0);
        }
    }
    Ok(rhs)
}

/// Exact minimiser of the objective over `U ≥ 0` for fixed `W` with diagonal
/// `WᵀW`: one NNLS problem with Gram `Cxx` per column.
pub fn u_step(
    cov: &CovarianceSet,
    w: &DMatrix<f64>,
    kkt_tolerance: Option<f64>,
) -> Result<DMatrix<f64>> {
    let rhs = u_step_rhs(cov, w)?;
    let sol = nnls_normal(
        &cov.cxx,
        &rhs,
        NnlsOptions {
            kkt_tolerance,
            ..Default::default()
        },
    )?;
    Ok(sol.x)
}

/// U-step that also chooses the sign of each column of `W`.
///
/// Eigenvectors are only defined up to sign, but under `U ≥ 0` the two signs
/// lead to different problems. Both are solved and the better one kept; the
/// returned `W` carries the chosen signs.
pub(crate) fn u_step_signed(
    cov: &CovarianceSet,
    w: &DMatrix<f64>,
    kkt_tolerance: Option<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let rhs = u_step_rhs(cov, w)?;
    let n_f = w.ncols();
    let both = DMatrix::from_fn(rhs.nrows(), 2 * n_f, |i, j| {
        if j < n_f {
            rhs[(i, j)]
        } else {
            -rhs[(i, j - n_f)]
        }
    });
    let sol = nnls_normal(
        &cov.cxx,
        &both,
        NnlsOptions {
            kkt_tolerance,
            ..Default::default()
        },
    )?;
    let mut u = DMatrix::zeros(rhs.nrows(), n_f);
    let mut w = w.clone();
    for j in 0..n_f {
        // at an NNLS optimum the column objective equals −uᵀ rhs
        let plus = sol.x.column(j).dot(&both.column(j));
        let minus = sol.x.column(j + n_f).dot(&both.column(j + n_f));
        if minus > plus {
            u.set_column(j, &sol.x.column(j + n_f));
            w.column_mut(j).neg_mut();
        } else {
            u.set_column(j, &sol.x.column(j));
        }
    }
    Ok((u, w))
}

/// Orthogonal Procrustes solution `W = Q Pᵀ` for `M = P D Qᵀ` (`M` is
/// `n_f × m`).
pub fn procrustes_w(m_matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m_matrix.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate(
            "projected cross-covariance is identically zero".into(),
        ));
    }
    let (p, _, q) = thin_svd(m_matrix);
    Ok(q * p.transpose())
}

/// `w = Cxyᵀu / ‖Cxyᵀu‖₂`. A zero product means the cross-covariance has
/// nothing left in the direction of `u`.
pub fn unidim_w(cxy: &DMatrix<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
    let v = cxy.transpose() * u;
    let norm = v.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Degenerate("deflation exhausted: Cxyᵀu = 0".into()));
    }
    Ok(v / norm)
}

/// Schur-complement deflation `C ← C − (Cv)vᵀ / (vᵀv)` with `v = Cᵀu`.
/// Leaves `C` unchanged (with a warning) when `v = 0`.
pub fn schur_deflate(cxy: &DMatrix<f64>, u: &DVector<f64>) -> DMatrix<f64> {
    let v = cxy.transpose() * u;
    let vv = v.norm_squared();
    if vv == 0.0 {
        log::warn!("schur deflation skipped: uᵀC = 0");
        return cxy.clone();
    }
    let cv = cxy * &v;
    cxy - (cv * v.transpose()) / vv
}

/// Least-squares regression matrix for a fixed bank:
/// `W = Cxyᵀ U (Uᵀ Cxx U)⁻¹`. Zero columns of `U` get zero columns of `W`.
pub fn refit_w(cov: &CovarianceSet, u: &DMatrix<f64>) -> DMatrix<f64> {
    let zero = zero_columns(u);
    let live: Vec<usize> = (0..u.ncols()).filter(|j| !zero.contains(j)).collect();
    let mut w = DMatrix::zeros(cov.n_targets(), u.ncols());
    if live.is_empty() {
        return w;
    }
    let ul = crate::linalg::select_columns(u, &live);
    let gram = ul.transpose() * &cov.cxx * &ul;
    let cross = ul.transpose() * &cov.cxy; // k × m
    let scale = gram.diagonal().amax().max(1e-300);
    let sol = crate::linalg::solve_spd(&gram, &cross, 1e-13 * scale); // k × m
    for (k, &j) in live.iter().enumerate() {
        w.set_column(j, &sol.row(k).transpose());
    }
    w
}

/// Objective value of `U` with its least-squares `W`.
pub fn refit_loss(cov: &CovarianceSet, u: &DMatrix<f64>) -> f64 {
    trace_loss(cov, u, &refit_w(cov, u))
}

/// Column order whose leading `k` columns reach the smallest refit loss among
/// all `k`-column subsets, for every `k` at once when a nested chain of such
/// subsets exists. Otherwise the chain with the most optimal prefixes wins,
/// ties going to the smaller summed loss and then to the current order.
/// Banks wider than [`EXHAUSTIVE_ORDER_LIMIT`] use greedy forward selection.
pub fn relevance_order(cov: &CovarianceSet, u: &DMatrix<f64>) -> Vec<usize> {
    let n_f = u.ncols();
    if n_f > EXHAUSTIVE_ORDER_LIMIT {
        return greedy_order(cov, u);
    }
    let full = (1usize << n_f) - 1;
    let members = |mask: usize| -> Vec<usize> { (0..n_f).filter(|j| mask >> j & 1 == 1).collect() };
    let mut loss = vec![cov.cyy.trace(); full + 1];
    let mut best = vec![f64::INFINITY; n_f + 1];
    for mask in 1..=full {
        loss[mask] = refit_loss(cov, &crate::linalg::select_columns(u, &members(mask)));
        let k = mask.count_ones() as usize;
        best[k] = best[k].min(loss[mask]);
    }
    let tol = 1e-12 * cov.cyy.trace().abs().max(f64::MIN_POSITIVE);
    let optimal = |mask: usize| loss[mask] <= best[mask.count_ones() as usize] + tol;

    // (optimal prefixes, summed loss, parent) for the best chain ending at each mask
    let mut score: Vec<Option<(usize, f64, usize)>> = vec![None; full + 1];
    score[0] = Some((0, 0.0, 0));
    for mask in 0..full {
        let Some((hits, total, _)) = score[mask] else { continue };
        for j in (0..n_f).filter(|j| mask >> j & 1 == 0) {
            let next = mask | 1 << j;
            let cand = (hits + optimal(next) as usize, total + loss[next]);
            let better = score[next].is_none_or(|(h, t, _)| cand.0 > h || (cand.0 == h && cand.1 < t - tol));
            if better {
                score[next] = Some((cand.0, cand.1, mask));
            }
        }
    }
    let mut order = Vec::with_capacity(n_f);
    let mut mask = full;
    while mask != 0 {
        let parent = score[mask].expect("every mask is reachable").2;
        order.push((mask ^ parent).trailing_zeros() as usize);
        mask = parent;
    }
    order.reverse();
    order
}

/// Widest bank ordered by exhaustive subset search (2^n refits).
pub const EXHAUSTIVE_ORDER_LIMIT: usize = 12;

fn greedy_order(cov: &CovarianceSet, u: &DMatrix<f64>) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::with_capacity(u.ncols());
    let mut rest: Vec<usize> = (0..u.ncols()).collect();
    while !rest.is_empty() {
        let (pos, _) = rest
            .iter()
            .enumerate()
            .map(|(p, &j)| {
                let mut s = chosen.clone();
                s.push(j);
                (p, refit_loss(cov, &crate::linalg::select_columns(u, &s)))
            })
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        chosen.push(rest.remove(pos));
    }
    chosen
}
