use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::steps::{refit_loss, refit_w, relevance_order, schur_deflate};
use super::{exhausted, finish_bank, prepare, SolverConfig, SolverOutput, SolverReport, StopReason};
use crate::dataset::CenteredDataset;
use crate::error::Result;
use crate::filterbank::Method;
use crate::linalg::{add_ridge, select_columns, thin_svd};

/// `uᵀ C Cᵀ u / uᵀ (Cxx + τI) u`; zero when the denominator vanishes.
pub fn popls_quotient(cxx: &DMatrix<f64>, cxy: &DMatrix<f64>, u: &DVector<f64>, ridge_tau: f64) -> f64 {
    let num = (cxy.transpose() * u).norm_squared();
    let den = u.dot(&(cxx * u)) + ridge_tau * u.norm_squared();
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

struct Quotient<'a> {
    b: &'a DMatrix<f64>,
    c: &'a DMatrix<f64>,
}

impl Quotient<'_> {
    fn value(&self, u: &DVector<f64>) -> f64 {
        let den = u.dot(&(self.b * u));
        if den > 0.0 {
            (self.c.transpose() * u).norm_squared() / den
        } else {
            0.0
        }
    }

    /// Value and gradient `2(A u − q B u) / uᵀBu` with `A = C Cᵀ`.
    fn value_grad(&self, u: &DVector<f64>) -> (f64, DVector<f64>) {
        let bu = self.b * u;
        let den = u.dot(&bu);
        if den <= 0.0 {
            return (0.0, DVector::zeros(u.len()));
        }
        let cu = self.c.transpose() * u;
        let q = cu.norm_squared() / den;
        let au = self.c * cu;
        (q, (au - bu * q) * (2.0 / den))
    }
}

/// Clip to the non-negative orthant and return to the unit sphere.
fn project(v: &DVector<f64>) -> Option<DVector<f64>> {
    let p = v.map(|x| x.max(0.0));
    let n = p.norm();
    (n > 0.0).then(|| p / n)
}

/// Projected gradient ascent with backtracking from a unit start vector.
fn ascend(f: &Quotient, start: DVector<f64>, max_iter: usize) -> (DVector<f64>, f64) {
    let mut u = start;
    let mut q = f.value(&u);
    let mut step = f64::NAN;
    let mut stalled = 0;
    for _ in 0..max_iter {
        let (_, g) = f.value_grad(&u);
        let gnorm = g.norm();
        if gnorm == 0.0 {
            break;
        }
        if !step.is_finite() {
            step = 0.5 / gnorm;
        }
        let mut accepted = None;
        for _ in 0..60 {
            if let Some(cand) = project(&(&u + &g * step)) {
                let qc = f.value(&cand);
                let decrease = 1e-4 * g.dot(&(&cand - &u)).max(0.0);
                if qc > q + decrease {
                    accepted = Some((cand, qc));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((cand, qc)) = accepted else { break };
        let gain = qc - q;
        let moved = (&cand - &u).norm();
        u = cand;
        q = qc;
        step *= 2.0;
        if gain <= 1e-15 * q.abs() || moved <= 1e-13 {
            stalled += 1;
            if stalled >= 3 {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    (u, q)
}

/// Exact maximiser of the quotient restricted to the current support. Kept
/// only when it stays in the non-negative orthant and improves the value.
fn polish(f: &Quotient, u: &DVector<f64>, q: f64) -> Option<(DVector<f64>, f64)> {
    let support: Vec<usize> = (0..u.len()).filter(|&i| u[i] > 0.0).collect();
    if support.is_empty() {
        return None;
    }
    let bs = f.b.select_rows(&support).select_columns(&support);
    let cs = f.c.select_rows(&support);
    let chol = bs.cholesky()?;
    let l_inv_c = chol.l().solve_lower_triangular(&cs)?;
    let (p, s, _) = thin_svd(&l_inv_c);
    if s.is_empty() || s[0] == 0.0 {
        return None;
    }
    let z = p.column(0).into_owned();
    let mut v = chol.l().transpose().solve_upper_triangular(&z)?;
    if v.sum() < 0.0 {
        v.neg_mut();
    }
    if v.iter().any(|&x| x < 0.0) {
        return None;
    }
    let mut full = DVector::zeros(u.len());
    for (k, &i) in support.iter().enumerate() {
        full[i] = v[k];
    }
    let full = project(&full)?;
    let qf = f.value(&full);
    (qf > q).then_some((full, qf))
}

fn leading_direction(c: &DMatrix<f64>) -> Option<DVector<f64>> {
    let (p, s, _) = thin_svd(c);
    if s.is_empty() || s[0] == 0.0 {
        return None;
    }
    let x = p.column(0).into_owned();
    let pos = x.map(|v| v.max(0.0));
    let neg = x.map(|v| (-v).max(0.0));
    project(if pos.norm() >= neg.norm() { &pos } else { &neg })
}

/// Start vectors: the NNDSVD leading direction, then coordinate vectors by
/// decreasing `‖Cᵀe_i‖`, then seeded random non-negative directions.
fn starts(c: &DMatrix<f64>, restarts: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let n = c.nrows();
    let mut out = Vec::with_capacity(restarts);
    if let Some(v) = leading_direction(c) {
        out.push(v);
    }
    let mut order: Vec<(usize, f64)> = c
        .row_iter()
        .map(|r| r.norm_squared())
        .enumerate()
        .filter(|(_, v)| *v > 0.0)
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (i, _) in order {
        if out.len() >= restarts {
            break;
        }
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        out.push(e);
    }
    while out.len() < restarts {
        let v = DVector::from_fn(n, |_, _| rng.random::<f64>());
        match project(&v) {
            Some(v) => out.push(v),
            None => break,
        }
    }
    out.truncate(restarts.max(1));
    out
}

/// Sequential design with `W` eliminated in closed form: each filter
/// maximises the (ridge-regularised) quotient over the non-negative part of
/// the unit sphere, then `Cxy` is Schur-deflated.
pub fn popls(d: &CenteredDataset, config: &SolverConfig) -> Result<SolverOutput> {
    let cov = prepare(d, config)?;
    let n = cov.n_inputs();
    let tau = config.ridge_for(&cov.cxx);
    let b = add_ridge(&cov.cxx, tau);
    let c_norm = cov.cxy.norm();
    let max_iter = config.max_outer_iterations.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut report = SolverReport::new(Method::Popls);
    let mut u_mat = DMatrix::zeros(n, config.n_f);
    let mut c = cov.cxy.clone();
    let mut first_q = None;
    report.stop_reason = StopReason::Tolerance;

    for j in 0..config.n_f {
        let mut best: Option<(DVector<f64>, f64)> = None;
        if !exhausted(&c, c_norm) {
            let f = Quotient { b: &b, c: &c };
            for s in starts(&c, config.popls_restarts, &mut rng) {
                let (mut u, mut q) = ascend(&f, s, max_iter);
                if let Some((pu, pq)) = polish(&f, &u, q) {
                    (u, q) = ascend(&f, pu, max_iter);
                    q = q.max(pq);
                }
                if best.as_ref().is_none_or(|b| q > b.1) {
                    best = Some((u, q));
                }
            }
        }
        let q_ref = *first_q.get_or_insert(best.as_ref().map_or(0.0, |b| b.1));
        let Some((u, q)) = best.filter(|b| b.1 > 1e-12 * q_ref && b.1 > 0.0) else {
            report.stop_reason = StopReason::DeflationExhausted;
            report.warn(format!(
                "cross-covariance exhausted after {j} of {} filters",
                config.n_f
            ));
            break;
        };
        log::debug!("popls filter {j}: quotient {q:e}");
        u_mat.set_column(j, &u);
        report.filters_extracted = j + 1;
        report.outer_iterations += 1;
        let before = c.norm();
        c = schur_deflate(&c, &u);
        let resid = (c.transpose() * &u).amax();
        report
            .deflation_residuals
            .push(if before > 0.0 { resid / before } else { 0.0 });
        report
            .loss_trajectory
            .push(refit_loss(&cov, &u_mat.columns(0, j + 1).into_owned()));
    }

    let u_mat = select_columns(&u_mat, &relevance_order(&cov, &u_mat));
    let w = refit_w(&cov, &u_mat);
    report.final_loss = refit_loss(&cov, &u_mat);
    report.degenerate_columns = crate::linalg::zero_columns(&u_mat);
    if report.loss_trajectory.is_empty() {
        report.loss_trajectory.push(report.final_loss);
    }
    let bank = finish_bank(u_mat, Method::Popls, None)?;
    Ok(SolverOutput { bank, w, report })
}
