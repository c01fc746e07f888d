//! Solver outputs checked against independent computations.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nnopls::dataset::{center, covariances, CenteredDataset, CovarianceSet, RawDataset};
use nnopls::filterbank::{reconstruction_loss, trace_loss, Method};
use nnopls::linalg::{singular_values, thin_svd};
use nnopls::nnls::{nnls_solve, NnlsProblem};
use nnopls::solvers::{
    defnopls, design, nmf_opls, nndsvd_init, nopls, opls_baseline, pnopls, popls, popls_quotient,
    procrustes_w, refit_loss, schur_deflate, u_step, unidim_w, w_step, SolverConfig,
};

fn random_data(rng: &mut ChaCha8Rng, n: usize, m: usize, big_n: usize) -> CenteredDataset {
    let x = DMatrix::from_fn(n, big_n, |_, _| rng.random::<f64>());
    let y = DMatrix::from_fn(m, big_n, |_, _| rng.random::<f64>() - 0.5);
    CenteredDataset::from_matrices(&x, &y).unwrap()
}

fn random_orthonormal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() - 0.5);
    g.qr().q().columns(0, cols).into_owned()
}

fn unregularised(n_f: usize) -> SolverConfig {
    SolverConfig {
        ridge_tau: Some(0.0),
        ..SolverConfig::with_n_f(n_f)
    }
}

#[test]
fn w_step_eigenvalues_are_squared_singular_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let cxy = DMatrix::from_fn(5, 3, |_, _| rng.random::<f64>() - 0.5);
        let cov = CovarianceSet {
            cxx: DMatrix::identity(5, 5),
            cxy: cxy.clone(),
            cyy: DMatrix::identity(3, 3),
        };
        let e = w_step(&cov, &DMatrix::identity(5, 5)).unwrap();
        let s = singular_values(&cxy);
        for k in 0..3 {
            assert!((e.lambda[k] - s[k] * s[k]).abs() < 1e-10, "{} vs {}", e.lambda[k], s[k] * s[k]);
        }
        let wtw = e.w.transpose() * &e.w;
        assert!((wtw - DMatrix::identity(3, 3)).amax() < 1e-10);
    }
}

#[test]
fn w_step_diagonal_case_and_scaling() {
    let cov = CovarianceSet {
        cxx: DMatrix::identity(2, 2),
        cxy: DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0])),
        cyy: DMatrix::identity(2, 2),
    };
    let e = w_step(&cov, &DMatrix::identity(2, 2)).unwrap();
    assert!((e.lambda[0] - 4.0).abs() < 1e-12 && (e.lambda[1] - 1.0).abs() < 1e-12);
    assert!((e.w[(0, 0)].abs() - 1.0).abs() < 1e-12 && (e.w[(1, 1)].abs() - 1.0).abs() < 1e-12);
    let e3 = w_step(&cov, &(DMatrix::identity(2, 2) * 3.0)).unwrap();
    assert!((e3.lambda[0] - 36.0).abs() < 1e-10 && (e3.lambda[1] - 9.0).abs() < 1e-10);
    assert!((e3.w.abs() - e.w.abs()).amax() < 1e-12);
}

#[test]
fn u_step_matches_vectorised_nnls() {
    // the joint problem min_{U≥0} ‖Y − W Uᵀ X‖² written as one NNLS in vec(U):
    // vec(W Uᵀ X) = (Xᵀ ⊗ W) vec(Uᵀ)
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let d = random_data(&mut rng, 4, 2, 30);
        let cov = covariances(&d);
        let w = random_orthonormal(&mut rng, 2, 2);
        let u = u_step(&cov, &w, None).unwrap();
        assert!(u.iter().all(|&v| v >= 0.0));

        let (n, n_f, big_n, m) = (4, 2, 30, 2);
        let design_matrix = d.x.transpose().kronecker(&w); // (N·m) × (n·n_f)
        let b = DMatrix::from_iterator(big_n * m, 1, d.y.iter().copied());
        let sol = nnls_solve(&NnlsProblem::new(design_matrix, b.clone()).unwrap(), None).unwrap();
        // vec(Uᵀ) is column-major over Uᵀ (n_f × n), i.e. row-major over U
        let u_oracle = DMatrix::from_fn(n, n_f, |i, j| sol.x[(i * n_f + j, 0)]);
        let f_step = reconstruction_loss(&u, &w, &d).unwrap();
        let f_oracle = reconstruction_loss(&u_oracle, &w, &d).unwrap();
        assert!((f_step - f_oracle).abs() <= 1e-8 * f_oracle.max(1.0), "{f_step} vs {f_oracle}");
    }
}

#[test]
fn procrustes_hand_cases() {
    let id = DMatrix::<f64>::identity(2, 2);
    assert!((procrustes_w(&id).unwrap() - &id).amax() < 1e-12);
    let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0]));
    assert!((procrustes_w(&d).unwrap() - &id).amax() < 1e-12);
    let m = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 1.0, 0.0]);
    let expect = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    assert!((procrustes_w(&m).unwrap() - expect).amax() < 1e-12);
    assert!(procrustes_w(&DMatrix::zeros(2, 2)).is_err());
}

#[test]
fn unidim_and_deflation_cases() {
    let cxy = DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 0.0, 0.0]);
    let w = unidim_w(&cxy, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
    assert!((w - DVector::from_vec(vec![0.6, 0.8])).amax() < 1e-15);
    assert!(unidim_w(&cxy, &DVector::from_vec(vec![0.0, 1.0])).is_err());

    let d = schur_deflate(&DMatrix::identity(2, 2), &DVector::from_vec(vec![1.0, 0.0]));
    assert_eq!(d, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let c = DMatrix::from_fn(6, 3, |_, _| rng.random::<f64>() - 0.5);
        let u = DVector::from_fn(6, |_, _| rng.random::<f64>() + 0.01);
        let deflated = schur_deflate(&c, &u);
        assert!((u.transpose() * &deflated).amax() <= 1e-10 * c.norm());
        let before = singular_values(&c);
        let after = singular_values(&deflated);
        let rank = |s: &DVector<f64>| s.iter().filter(|&&v| v > 1e-10 * before[0]).count();
        assert_eq!(rank(&after), rank(&before) - 1);
    }
}

#[test]
fn nndsvd_single_factor_matches_truncated_svd() {
    // the leading singular pair of a non-negative matrix can be taken
    // non-negative, so one factor is exactly the best rank-one fit. Beyond one
    // factor the sign split loses too much for any fixed multiple to hold.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n_f in [1] {
        for _ in 0..50 {
            let c = DMatrix::from_fn(8, 4, |_, _| rng.random::<f64>());
            let (u0, w0) = nndsvd_init(&c, n_f).unwrap();
            assert!(u0.iter().chain(w0.iter()).all(|&v| v > 0.0));
            let err = (&c - &u0 * w0.transpose()).norm();
            // Eckart–Young: best rank-n_f error from the tail singular values
            let s = singular_values(&c);
            let best = s.iter().skip(n_f).map(|v| v * v).sum::<f64>().sqrt();
            assert!(err <= best * (1.0 + 1e-10) + 1e-12, "n_f {n_f}: {err} vs best {best}");
        }
    }
    // rank one
    let a = DVector::from_vec(vec![1.0, 2.0, 0.5]);
    let b = DVector::from_vec(vec![3.0, 1.0]);
    let c = &a * b.transpose();
    let (u0, w0) = nndsvd_init(&c, 1).unwrap();
    assert!((&u0 * w0.transpose() - c).amax() < 1e-8);
}

#[test]
fn nopls_recovers_noise_free_planted_bank() {
    // disjoint supports make the rows of UᵀX nearly orthogonal after centring
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, n_f, big_n) = (12, 3, 200);
    let mut u_star = DMatrix::zeros(n, n_f);
    for j in 0..n_f {
        for i in 0..4 {
            u_star[(j * 4 + i, j)] = 0.5 + rng.random::<f64>();
        }
    }
    let x = DMatrix::from_fn(n, big_n, |_, _| rng.random::<f64>());
    let y = u_star.transpose() * &x;
    let d = CenteredDataset::from_matrices(&x, &y).unwrap();
    let cfg = SolverConfig {
        delta: Some(1e-14),
        max_outer_iterations: 5000,
        ..unregularised(n_f)
    };
    let out = nopls(&d, &cfg).unwrap();
    let total = d.y.norm_squared();
    let loss = reconstruction_loss(&out.bank.u, &out.w, &d).unwrap();
    assert!(loss <= 1e-8 * total, "loss {loss} vs ‖Y‖² {total}");
}

#[test]
fn nopls_with_independent_targets_is_degenerate() {
    // X varies only in the first row, Y only in samples where X is flat:
    // construct Cxy = 0 exactly
    let x = DMatrix::from_row_slice(2, 4, &[1., 1., 2., 2., 0., 0., 0., 0.]);
    let y = DMatrix::from_row_slice(1, 4, &[1., -1., 1., -1.]);
    let d = CenteredDataset::from_matrices(&x, &y).unwrap();
    assert_eq!(covariances(&d).cxy.amax(), 0.0);
    match nopls(&d, &SolverConfig::with_n_f(1)) {
        Ok(out) => {
            assert!(out.bank.u.iter().all(|&v| v == 0.0));
            assert_eq!(out.report.degenerate_columns, vec![0]);
            let loss = reconstruction_loss(&out.bank.u, &out.w, &d).unwrap();
            assert!((loss - d.y.norm_squared()).abs() < 1e-12);
        }
        Err(e) => assert!(matches!(e, nnopls::Error::Degenerate(_)), "{e}"),
    }
    assert!(pnopls(&d, &SolverConfig::with_n_f(1)).is_err());
}

#[test]
fn single_target_nopls_equals_defnopls() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..10 {
        let d = random_data(&mut rng, 6, 1, 40);
        let cfg = SolverConfig {
            delta: Some(1e-14),
            max_outer_iterations: 5000,
            ..unregularised(1)
        };
        let a = nopls(&d, &cfg).unwrap().report.final_loss;
        let b = defnopls(&d, &cfg).unwrap().report.final_loss;
        assert!((a - b).abs() <= 1e-8 * a.max(1.0), "{a} vs {b}");
    }
}

/// sin of the largest principal angle between the column spaces of a and b.
fn max_principal_sine(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = thin_svd(a).0;
    let qb = thin_svd(b).0;
    let residual = &qb - &qa * (qa.transpose() * &qb);
    singular_values(&residual)[0]
}

#[test]
fn pnopls_spans_nopls_subspace_when_square() {
    // both alternations are local; enough starts that each finds the global
    // optimum on these instances (at the default 4 a few percent disagree)
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let d = random_data(&mut rng, 6, 2, 50);
        let cfg = SolverConfig {
            delta: Some(1e-14),
            max_outer_iterations: 20_000,
            starts: 64,
            ..unregularised(2)
        };
        let a = nopls(&d, &cfg).unwrap();
        let b = pnopls(&d, &cfg).unwrap();
        let fa = (&a.w * a.bank.u.transpose() * &d.x).transpose();
        let fb = (&b.w * b.bank.u.transpose() * &d.x).transpose();
        let s = max_principal_sine(&fa, &fb);
        assert!(s.asin() <= 1e-4, "principal angle {}", s.asin());
    }
}

#[test]
fn pnopls_refuses_more_filters_than_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let d = random_data(&mut rng, 6, 2, 30);
    assert!(matches!(pnopls(&d, &SolverConfig::with_n_f(3)), Err(nnopls::Error::Config(_))));
}

/// Every k-subset of `0..n`, in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|mask| mask.count_ones() as usize == k)
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect()
}

#[test]
fn leading_filters_beat_every_other_subset() {
    // a bank whose k-optimal subsets are not nested cannot satisfy the
    // property under any order; those are counted, not asserted
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for method in [Method::Nopls, Method::Defnopls, Method::Popls] {
        let mut unnested = 0;
        for _ in 0..20 {
            let raw = {
                let d = random_data(&mut rng, 10, 4, 60);
                RawDataset::new(d.x.map(|v| v + 1.0), d.y).unwrap()
            };
            let cov = covariances(&center(&raw).unwrap());
            let out = design(method, &raw, &SolverConfig::with_n_f(4)).unwrap();
            let u = &out.bank.u;
            let loss = |s: &[usize]| refit_loss(&cov, &nnopls::linalg::select_columns(u, s));
            let optimal: Vec<Vec<usize>> = (1..4)
                .map(|k| {
                    subsets(4, k)
                        .into_iter()
                        .min_by(|a, b| loss(a).total_cmp(&loss(b)))
                        .unwrap()
                })
                .collect();
            if !optimal.windows(2).all(|p| p[0].iter().all(|i| p[1].contains(i))) {
                unnested += 1;
                continue;
            }
            for k in 1..4 {
                let lead = loss(&(0..k).collect::<Vec<_>>());
                for s in subsets(4, k) {
                    let other = loss(&s);
                    assert!(lead <= other * (1.0 + 1e-9), "{method} k={k} {s:?}: {lead} > {other}");
                }
            }
        }
        assert!(unnested <= 5, "{method}: {unnested} of 20 banks without nested optimal subsets");
    }
}

#[test]
fn unconstrained_baseline_is_a_lower_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..5 {
        let d = random_data(&mut rng, 8, 3, 60);
        let raw = RawDataset::new(d.x.map(|v| v + 1.0), d.y).unwrap();
        let cov = covariances(&center(&raw).unwrap());
        let cfg = unregularised(2);
        let (u, w, _) = opls_baseline(&center(&raw).unwrap(), &cfg).unwrap();
        let base = trace_loss(&cov, &u, &w);
        for m in [Method::Nopls, Method::Pnopls, Method::Defnopls, Method::Popls] {
            let out = design(m, &raw, &cfg).unwrap();
            let constrained = refit_loss(&cov, &out.bank.u);
            assert!(base <= constrained * (1.0 + 1e-9), "{m}: {base} > {constrained}");
        }
    }
}

#[test]
fn single_target_baseline_maximises_quotient_over_all_directions() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let d = random_data(&mut rng, 5, 1, 40);
        let cov = covariances(&d);
        let cfg = unregularised(1);
        let (u, _, _) = opls_baseline(&d, &cfg).unwrap();
        let q_free = popls_quotient(&cov.cxx, &cov.cxy, &u.column(0).into_owned(), 0.0);
        let q_nonneg = popls(&d, &cfg).unwrap();
        let q_c = popls_quotient(&cov.cxx, &cov.cxy, &q_nonneg.bank.u.column(0).into_owned(), 0.0);
        assert!(q_free >= q_c * (1.0 - 1e-10), "{q_free} < {q_c}");
        // and no random direction beats it
        for _ in 0..200 {
            let v = DVector::from_fn(5, |_, _| rng.random::<f64>() - 0.5);
            assert!(popls_quotient(&cov.cxx, &cov.cxy, &v, 0.0) <= q_free * (1.0 + 1e-10));
        }
    }
}

#[test]
fn popls_two_dimensional_cases() {
    // Cxx = I and Cxy = c: quotient is (uᵀc)²
    let quotient_case = |c: [f64; 2]| {
        let cxx = DMatrix::<f64>::identity(2, 2);
        let cxy = DMatrix::from_column_slice(2, 1, &c);
        (cxx, cxy)
    };
    let (cxx, cxy) = quotient_case([3.0, 4.0]);
    assert!((popls_quotient(&cxx, &cxy, &DVector::from_vec(vec![0.6, 0.8]), 0.0) - 25.0).abs() < 1e-12);

    // a dataset with those covariances: X rows orthonormal, Y = cᵀX
    let x = DMatrix::from_row_slice(2, 4, &[1., -1., 1., -1., 1., 1., -1., -1.]) / 2.0;
    for (c, expect) in [([3.0, 4.0], [0.6, 0.8]), ([3.0, -4.0], [0.0, 1.0])] {
        let y = DMatrix::from_row_slice(1, 2, &c) * &x;
        let d = CenteredDataset::from_matrices(&x.map(|v| v + 1.0), &y).unwrap();
        let out = popls(&d, &unregularised(1)).unwrap();
        let u = out.bank.u.column(0).normalize();
        assert!((u[0] - expect[0]).abs() < 1e-6 && (u[1] - expect[1]).abs() < 1e-6, "{c:?}: {u}");
    }
}

#[test]
fn nmf_close_to_nopls_on_nonnegative_planted_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (n, n_f, m, big_n) = (12, 2, 3, 200);
    let mut u_star = DMatrix::zeros(n, n_f);
    for j in 0..n_f {
        for i in 0..3 {
            u_star[(j * 6 + i, j)] = 0.5 + rng.random::<f64>();
        }
    }
    let w_star = DMatrix::from_fn(m, n_f, |_, _| 0.2 + rng.random::<f64>());
    let x = DMatrix::from_fn(n, big_n, |_, _| rng.random::<f64>());
    let y = &w_star * u_star.transpose() * &x + DMatrix::from_fn(m, big_n, |_, _| 0.05 * rng.random::<f64>());
    let raw = RawDataset::new(x, y).unwrap();
    let cfg = SolverConfig {
        max_outer_iterations: 5000,
        ..SolverConfig::with_n_f(n_f)
    };
    let nmf = nmf_opls(&raw, &cfg).unwrap();
    let traj = &nmf.report.loss_trajectory;
    assert!(nmf.report.final_loss <= traj[0]);
    let reference = nopls(&center(&raw).unwrap(), &cfg).unwrap().report.final_loss;
    assert!(
        nmf.report.final_loss <= 1.5 * reference,
        "nmf {} vs nopls {reference}",
        nmf.report.final_loss
    );
}

#[test]
fn trace_loss_equals_direct_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10 {
        let d = random_data(&mut rng, 7, 3, 25);
        let cov = covariances(&d);
        let u = DMatrix::from_fn(7, 2, |_, _| rng.random::<f64>());
        let w = DMatrix::from_fn(3, 2, |_, _| rng.random::<f64>() - 0.5);
        let direct = reconstruction_loss(&u, &w, &d).unwrap();
        assert!((direct - trace_loss(&cov, &u, &w)).abs() <= 1e-8 * direct.max(1.0));
        assert!((reconstruction_loss(&DMatrix::zeros(7, 2), &w, &d).unwrap() - d.y.norm_squared()).abs() < 1e-12);
    }
}
