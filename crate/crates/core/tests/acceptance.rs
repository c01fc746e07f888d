//! Acceptance gate. Each criterion prints one `[PASS]` or `[FAIL]` line;
//! the process exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use nnopls::dataset::{covariances, CenteredDataset};
use nnopls::eval::{grouped_kfold, run_experiment, BankSource, ExperimentOptions};
use nnopls::filterbank::{default_zero_threshold, interpretability, nz_rate, Method};
use nnopls::nnls::{nnls_solve, NnlsProblem};
use nnopls::preprocess::{dft2, image_to_spectrum, periodogram, GrayImage};
use nnopls::solvers::{
    defnopls, design, nopls, opls_baseline, opls_unconstrained_alternation, popls, schur_deflate,
    SolverConfig, SolverOutput,
};
use nnopls::synthetic::{
    band_dataset, mass_fraction, planted_instance, support_recovery, BandSpec, PlantedSpec,
};

type Outcome = Result<String, String>;

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize, m: usize, samples: usize) -> CenteredDataset {
    let x = gaussian(rng, n, samples);
    let mix = gaussian(rng, m, n);
    let y = &mix * &x + gaussian(rng, m, samples) * 0.5;
    CenteredDataset::from_matrices(&x, &y).unwrap()
}

fn im_reproduction() -> Outcome {
    let cases = [
        (0.046, 9, 10, 1.4),
        (0.5202, 23, 111, 1.0),
        (0.029, 4, 11, 2.0),
    ];
    let mut got = Vec::new();
    for (nz, n_f, n_ref, expect) in cases {
        let v = interpretability(nz, n_f, n_ref).map_err(|e| e.to_string())?;
        got.push(format!("{v:.3}"));
        if (v - expect).abs() > 0.05 {
            return Err(format!("IM({nz}, {n_f}, {n_ref}) = {v}, expected {expect} ± 0.05"));
        }
    }
    Ok(got.join(", "))
}

/// Minimum of `‖b − A x‖²` over `x ≥ 0` by trying every support whose
/// unconstrained least-squares solution is non-negative.
fn exhaustive_nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let q = a.ncols();
    let mut best = b.norm_squared();
    for mask in 1u32..(1 << q) {
        let cols: Vec<usize> = (0..q).filter(|&i| mask & (1 << i) != 0).collect();
        let sub = DMatrix::from_fn(a.nrows(), cols.len(), |r, c| a[(r, cols[c])]);
        let gram = sub.transpose() * &sub;
        let Some(chol) = gram.cholesky() else { continue };
        let x = chol.solve(&(sub.transpose() * b));
        if x.iter().all(|&v| v >= 0.0) {
            best = best.min((b - &sub * x).norm_squared());
        }
    }
    best
}

fn nnls_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for t in 0..200 {
        let q = rng.random_range(1..=12);
        let p = rng.random_range(q + 1..=2 * q + 4);
        let a = gaussian(&mut rng, p, q);
        let b = gaussian(&mut rng, p, 1);
        let problem = NnlsProblem::new(a.clone(), b.clone()).unwrap();
        let sol = nnls_solve(&problem, None).map_err(|e| format!("problem {t}: {e}"))?;
        if sol.x.iter().any(|&v| v < 0.0) {
            return Err(format!("problem {t}: negative entry in solution"));
        }
        let f = problem.objective(&sol.x);
        let oracle = exhaustive_nnls(&a, &b.column(0).into_owned());
        let rel = (f - oracle).abs() / oracle.max(f64::EPSILON * b.norm_squared());
        worst = worst.max(rel);
        if rel > 1e-8 {
            return Err(format!("problem {t} (q = {q}): objective {f:e} vs oracle {oracle:e}"));
        }
    }
    Ok(format!("worst relative gap {worst:.1e}"))
}

fn deflation_orthogonality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for t in 0..100 {
        let n = rng.random_range(2..=30);
        let m = rng.random_range(1..=6);
        let c = gaussian(&mut rng, n, m) * 10f64.powi(rng.random_range(-3..=3));
        let mut u = gaussian(&mut rng, n, 1).column(0).map(|v: f64| v.abs());
        u /= u.norm();
        let d = schur_deflate(&c, &u);
        let r = (d.transpose() * &u).amax() / c.norm();
        worst = worst.max(r);
        if r > 1e-10 {
            return Err(format!("pair {t}: |uᵀC'| / ‖C‖ = {r:e}"));
        }
    }
    let mut runs = 0;
    for _ in 0..20 {
        let n = rng.random_range(3..=15);
        let m = rng.random_range(1..=4);
        let d = random_instance(&mut rng, n, m, 80);
        let cfg = SolverConfig::with_n_f(rng.random_range(1..=n.min(5)));
        for out in [defnopls(&d, &cfg), popls(&d, &cfg)] {
            let out = out.map_err(|e| e.to_string())?;
            runs += 1;
            for (j, &r) in out.report.deflation_residuals.iter().enumerate() {
                worst = worst.max(r);
                if r > 1e-10 {
                    return Err(format!("{} filter {j}: residual {r:e}", out.report.method));
                }
            }
        }
    }
    Ok(format!("100 pairs + {runs} solver runs, worst {worst:.1e}"))
}

fn monotone_descent() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut iterations = 0;
    for t in 0..50 {
        let n = rng.random_range(2..=20);
        let m = rng.random_range(1..=5);
        let samples = rng.random_range(n + 5..=200);
        let d = random_instance(&mut rng, n, m, samples);
        // n_f may exceed m, exercising the zero-padded W
        let cfg = SolverConfig::with_n_f(rng.random_range(1..=n.min(m + 1)));
        let out = nopls(&d, &cfg).map_err(|e| format!("instance {t}: {e}"))?;
        let traj = &out.report.loss_trajectory;
        iterations += traj.len();
        for k in 1..traj.len() {
            if traj[k] > traj[k - 1] + 1e-9 * traj[k - 1].abs() {
                return Err(format!(
                    "instance {t} (n={n}, m={m}, n_f={}): loss rose {:e} → {:e} at iteration {}",
                    cfg.n_f,
                    traj[k - 1],
                    traj[k],
                    k + 1
                ));
            }
        }
    }
    Ok(format!("{iterations} outer iterations checked"))
}

/// Best single-filter loss over a 0.5° grid of the non-negative octant in
/// three dimensions: `Tr Cyy − max ‖Cxyᵀu‖² / uᵀCxxu`.
fn octant_oracle(cxx: &DMatrix<f64>, cxy: &DMatrix<f64>, tr_cyy: f64) -> f64 {
    let steps = 180;
    let mut best_q = 0.0f64;
    for i in 0..=steps {
        let phi = i as f64 * PI / 2.0 / steps as f64;
        for j in 0..=steps {
            let theta = j as f64 * PI / 2.0 / steps as f64;
            let u = DVector::from_vec(vec![
                phi.sin() * theta.cos(),
                phi.sin() * theta.sin(),
                phi.cos(),
            ]);
            let den = u.dot(&(cxx * &u));
            if den > 0.0 {
                best_q = best_q.max((cxy.transpose() * &u).norm_squared() / den);
            }
        }
    }
    tr_cyy - best_q
}

fn global_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst = f64::NEG_INFINITY;
    for t in 0..20 {
        let d = random_instance(&mut rng, 3, 2, 60);
        let cov = covariances(&d);
        let oracle = octant_oracle(&cov.cxx, &cov.cxy, cov.cyy.trace());
        let cfg = SolverConfig {
            ridge_tau: Some(0.0),
            ..SolverConfig::with_n_f(1)
        };
        let runs: [(&str, SolverOutput); 3] = [
            ("nopls", nopls(&d, &cfg).map_err(|e| e.to_string())?),
            ("defnopls", defnopls(&d, &cfg).map_err(|e| e.to_string())?),
            ("popls", popls(&d, &cfg).map_err(|e| e.to_string())?),
        ];
        for (name, out) in runs {
            let gap = (out.report.final_loss - oracle) / oracle;
            worst = worst.max(gap);
            if gap > 1e-3 {
                return Err(format!(
                    "instance {t}: {name} loss {:e} vs grid {oracle:e}",
                    out.report.final_loss
                ));
            }
        }
    }
    Ok(format!("worst relative excess over grid {worst:.1e}"))
}

fn unconstrained_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut worst = 0.0f64;
    for t in 0..20 {
        let n = rng.random_range(2..=10);
        let m = rng.random_range(1..=4);
        let d = random_instance(&mut rng, n, m, 60);
        let cfg = SolverConfig {
            ridge_tau: Some(0.0),
            delta: Some(f64::MIN_POSITIVE),
            max_outer_iterations: 20_000,
            ..SolverConfig::with_n_f(rng.random_range(1..=n.min(m)))
        };
        let (_, _, closed) = opls_baseline(&d, &cfg).map_err(|e| e.to_string())?;
        let (_, _, alt) = opls_unconstrained_alternation(&d, &cfg).map_err(|e| e.to_string())?;
        let rel = (closed.final_loss - alt.final_loss).abs() / closed.final_loss.abs().max(1e-300);
        worst = worst.max(rel);
        if rel > 1e-8 {
            return Err(format!(
                "instance {t}: closed form {:e}, alternation {:e} after {} iterations",
                closed.final_loss, alt.final_loss, alt.outer_iterations
            ));
        }
    }
    Ok(format!("worst relative gap {worst:.1e}"))
}

fn planted_recovery() -> Outcome {
    let spec = PlantedSpec::default();
    let mut lines = Vec::new();
    for seed in 0..3 {
        let inst = planted_instance(&spec, seed).map_err(|e| e.to_string())?;
        let d = CenteredDataset::from_matrices(&inst.x, &inst.y).unwrap();
        let floor = inst.noise_floor();
        let cfg = SolverConfig::with_n_f(spec.n_f);
        for (name, out) in [
            ("nopls", nopls(&d, &cfg)),
            ("defnopls", defnopls(&d, &cfg)),
        ] {
            let out = out.map_err(|e| e.to_string())?;
            let ratio = out.report.final_loss / floor;
            let recovered = support_recovery(&inst.u_star, &out.bank.u, default_zero_threshold(&out.bank));
            if ratio > 1.1 || recovered < 0.9 {
                return Err(format!(
                    "seed {seed} {name}: loss/floor {ratio:.4}, support recovered {:.1}%",
                    100.0 * recovered
                ));
            }
            lines.push(format!("{name}@{seed} {ratio:.3}/{:.0}%", 100.0 * recovered));
        }
    }
    Ok(lines.join(" "))
}

fn spectral_pipeline() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut worst_dft = 0.0f64;
    let mut worst_parseval = 0.0f64;
    for _ in 0..5 {
        let img = DMatrix::from_fn(16, 16, |_, _| rng.random::<f64>());
        let f = dft2(&img);
        for ku in 0..16 {
            for kv in 0..16 {
                let mut acc = rustfft::num_complex::Complex::new(0.0, 0.0);
                for r in 0..16 {
                    for c in 0..16 {
                        let ang = -2.0 * PI * ((ku * r + kv * c) as f64) / 16.0;
                        acc += rustfft::num_complex::Complex::from_polar(img[(r, c)], ang);
                    }
                }
                worst_dft = worst_dft.max((acc - f[(ku, kv)]).norm());
            }
        }
        let energy: f64 = img.iter().map(|v| v * v).sum();
        let spec_energy: f64 = f.iter().map(|z| z.norm_sqr()).sum::<f64>() / 256.0;
        worst_parseval = worst_parseval.max((energy - spec_energy).abs() / energy);
    }
    if worst_dft > 1e-8 {
        return Err(format!("DFT differs from direct summation by {worst_dft:e}"));
    }
    if worst_parseval > 1e-6 {
        return Err(format!("Parseval violated by {worst_parseval:e}"));
    }
    let l = 256;
    for k in 1..l / 2 {
        let s: Vec<f64> = (0..l).map(|t| (2.0 * PI * (k * t) as f64 / l as f64).cos()).collect();
        let p = periodogram(&s).map_err(|e| e.to_string())?;
        if p.len() != 129 {
            return Err(format!("periodogram length {}", p.len()));
        }
        for (j, &v) in p.iter().enumerate() {
            let bad = if j == k { (v - l as f64 / 4.0).abs() > 1e-9 } else { v >= 1e-10 };
            if bad {
                return Err(format!("cosine at bin {k}: P[{j}] = {v:e}"));
            }
        }
    }
    let img = GrayImage::new(DMatrix::from_fn(120, 120, |_, _| rng.random::<f64>()), "r").unwrap();
    let grid = image_to_spectrum(&img, 12).map_err(|e| e.to_string())?;
    if grid.values.len() != 144 {
        return Err(format!("image grid length {}", grid.values.len()));
    }
    Ok(format!("DFT err {worst_dft:.1e}, Parseval err {worst_parseval:.1e}, lengths 144/129"))
}

const SEPARATING: [Method; 3] = [Method::Nopls, Method::Defnopls, Method::Popls];

fn end_to_end() -> Outcome {
    let spec = BandSpec::default();
    let data = band_dataset(&spec, 0).map_err(|e| e.to_string())?;
    let raw = data.raw().map_err(|e| e.to_string())?;
    let split = grouped_kfold(&data.groups, 5, 0).map_err(|e| e.to_string())?;
    let cfg = SolverConfig::with_n_f(3);
    let planted = spec.planted_indices();
    let mut lines = Vec::new();
    for method in SEPARATING {
        let report = run_experiment(
            &raw,
            &BankSource::Design(method),
            &cfg,
            &split,
            &ExperimentOptions::default(),
        )
        .map_err(|e| format!("{method}: {e}"))?;
        let bank = design(method, &raw, &cfg).map_err(|e| format!("{method}: {e}"))?.bank;
        let mass = mass_fraction(&bank.u, &planted);
        lines.push(format!("{method} OA {:.1}% mass {:.1}%", report.oa_percent, 100.0 * mass));
        if report.oa_percent < 90.0 || mass < 0.8 || !report.failures.is_empty() {
            return Err(lines.join(", "));
        }
    }
    // reported for context; the criterion covers the three methods above
    for method in [Method::Pnopls, Method::NmfOpls] {
        let bank = design(method, &raw, &cfg).map_err(|e| format!("{method}: {e}"))?.bank;
        lines.push(format!("({method} mass {:.1}%)", 100.0 * mass_fraction(&bank.u, &planted)));
    }
    Ok(lines.join(", "))
}

fn sparsity_contrast() -> Outcome {
    let spec = BandSpec::default();
    let data = band_dataset(&spec, 0).map_err(|e| e.to_string())?;
    let raw = data.raw().map_err(|e| e.to_string())?;
    let cfg = SolverConfig::with_n_f(3);
    let mut lines = Vec::new();
    let mut ok = true;
    for method in Method::DESIGNED {
        let bank = design(method, &raw, &cfg).map_err(|e| format!("{method}: {e}"))?.bank;
        let nz = nz_rate(&bank, None);
        lines.push(format!("{method} {nz:.3}"));
        ok &= if method.is_constrained() { nz < 0.2 } else { nz > 0.99 };
    }
    if ok {
        Ok(format!("NZ: {}", lines.join(", ")))
    } else {
        Err(format!("NZ: {}", lines.join(", ")))
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("IM reproduction", im_reproduction, Duration::from_secs(1)),
        ("NNLS oracle equivalence", nnls_oracle, Duration::from_secs(30)),
        ("Deflation orthogonality", deflation_orthogonality, Duration::from_secs(5)),
        ("NOPLS monotone descent", monotone_descent, Duration::from_secs(60)),
        ("Global optimality at n = 3", global_optimality, Duration::from_secs(60)),
        ("Unconstrained consistency", unconstrained_consistency, Duration::from_secs(10)),
        ("Planted-bank recovery", planted_recovery, Duration::from_secs(60)),
        ("Spectral pipeline", spectral_pipeline, Duration::from_secs(10)),
        ("End-to-end separability", end_to_end, Duration::from_secs(120)),
        ("Sparsity contrast", sparsity_contrast, Duration::from_secs(120)),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > limit => Err(format!("{detail}; took {took:.2?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail} ({took:.2?})"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name}: {why} ({took:.2?})");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
