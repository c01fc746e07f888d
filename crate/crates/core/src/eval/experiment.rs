use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ridge::{predict, ridge_fit, LinearModel};
use super::split::{grouped_holdout, GroupedSplit};
use crate::dataset::{encode_targets, RawDataset};
use crate::error::{Error, Result};
use crate::filterbank::{extract, interpretability, nz_rate, FilterBank, Method};
use crate::solvers::{design, SolverConfig, SolverReport};

pub const DEFAULT_LAMBDA_GRID: [f64; 7] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0];

/// Where a fold's bank comes from.
#[derive(Debug, Clone)]
pub enum BankSource {
    /// Designed on each training partition.
    Design(Method),
    /// A fixed bank (Gabor, Philips, or any loaded bank).
    Fixed(FilterBank),
}

impl BankSource {
    pub fn method(&self) -> Method {
        match self {
            BankSource::Design(m) => *m,
            BankSource::Fixed(b) => b.method,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldFailure {
    pub fold: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub n_f: usize,
    /// `100 · trace(confusion) / N` pooled over all test samples.
    pub oa_percent: f64,
    /// Simple mean of the per-fold accuracies.
    pub mean_fold_oa: f64,
    pub per_fold_oa: Vec<f64>,
    pub nz: f64,
    pub im: Option<f64>,
    pub n_ref: usize,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub lambdas: Vec<f64>,
    /// Pooled OA using only the first k filters, k = 1…n_f. Present only for
    /// relevance-ordered banks.
    pub oa_per_k: Option<Vec<f64>>,
    pub truncation_meaningful: bool,
    pub solver_reports: Vec<SolverReport>,
    pub failures: Vec<FoldFailure>,
    pub wall_time: f64,
}

impl EvalReport {
    /// Indices of the folds that produced a bank, in order.
    pub fn succeeded_folds(&self) -> Vec<usize> {
        let k = self.per_fold_oa.len() + self.failures.len();
        (0..k).filter(|f| !self.failures.iter().any(|x| x.fold == *f)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOptions {
    pub lambda_grid: Vec<f64>,
    /// Reference bank size in the IM formula; defaults to the class count.
    pub n_ref: Option<usize>,
    /// Also compute accuracy for every prefix of ordered banks.
    pub per_k: bool,
    pub seed: u64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            n_ref: None,
            per_k: true,
            seed: 0,
        }
    }
}

struct FoldOutcome {
    bank: FilterBank,
    report: Option<SolverReport>,
    /// (true, predicted) per test sample.
    pairs: Vec<(usize, usize)>,
    /// Predictions with the first k filters, k = 1…n_f.
    per_k: Vec<Vec<(usize, usize)>>,
    lambda: f64,
}

fn accuracy(pairs: &[(usize, usize)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    100.0 * pairs.iter().filter(|(t, p)| t == p).count() as f64 / pairs.len() as f64
}

/// Inner grouped 80/20 validation over the lambda grid; returns the first
/// lambda with the best validation accuracy.
fn select_lambda(
    feats: &DMatrix<f64>,
    labels: &[usize],
    train: &[usize],
    groups: &[String],
    classes: usize,
    grid: &[f64],
    seed: u64,
) -> Result<f64> {
    let fallback = grid[grid.len() / 2];
    let Some((inner_t, inner_v)) = grouped_holdout(train, groups, 0.2, seed) else {
        return Ok(fallback);
    };
    if inner_t.is_empty() || inner_v.is_empty() {
        return Ok(fallback);
    }
    let xt = crate::linalg::select_columns(feats, &inner_t);
    let yt = one_hot(&inner_t, labels, classes)?;
    let xv = crate::linalg::select_columns(feats, &inner_v);
    let mut best = (f64::NEG_INFINITY, fallback);
    for &lambda in grid {
        let model = ridge_fit(&xt, &yt, lambda)?;
        let pred = predict(&model, &xv)?;
        let acc = inner_v
            .iter()
            .zip(pred)
            .filter(|(&i, p)| labels[i] == *p)
            .count() as f64;
        if acc > best.0 {
            best = (acc, lambda);
        }
    }
    Ok(best.1)
}

fn one_hot(idx: &[usize], labels: &[usize], classes: usize) -> Result<DMatrix<f64>> {
    let l: Vec<i64> = idx.iter().map(|&i| labels[i] as i64).collect();
    encode_targets(&l, classes)
}

#[allow(clippy::too_many_arguments)]
fn classify(
    feats: &DMatrix<f64>,
    labels: &[usize],
    train: &[usize],
    test: &[usize],
    groups: &[String],
    classes: usize,
    grid: &[f64],
    seed: u64,
) -> Result<(Vec<(usize, usize)>, f64)> {
    let lambda = select_lambda(feats, labels, train, groups, classes, grid, seed)?;
    let model: LinearModel = ridge_fit(
        &crate::linalg::select_columns(feats, train),
        &one_hot(train, labels, classes)?,
        lambda,
    )?;
    let pred = predict(&model, &crate::linalg::select_columns(feats, test))?;
    Ok((test.iter().map(|&i| labels[i]).zip(pred).collect(), lambda))
}

#[allow(clippy::too_many_arguments)]
fn run_fold(
    raw: &RawDataset,
    labels: &[usize],
    source: &BankSource,
    config: &SolverConfig,
    split: &GroupedSplit,
    fold: usize,
    options: &ExperimentOptions,
    per_k: bool,
) -> Result<FoldOutcome> {
    let train = split.train_indices(fold);
    let test = split.test_indices(fold);
    if train.len() < 2 || test.is_empty() {
        return Err(Error::Split(format!("fold {fold} has an empty partition")));
    }
    let (bank, report) = match source {
        BankSource::Design(method) => {
            let out = design(*method, &raw.subset(&train)?, config)?;
            (out.bank, Some(out.report))
        }
        BankSource::Fixed(bank) => (bank.clone(), None),
    };
    // features of every sample with the training bank; the classifier
    // re-centres on training statistics itself
    let zero = DVector::zeros(raw.n_inputs());
    let feats = extract(&bank, raw.inputs(), &zero)?.x_prime;
    let classes = raw.n_targets();
    let seed = options.seed.wrapping_add(fold as u64);
    let (pairs, lambda) = classify(
        &feats,
        labels,
        &train,
        &test,
        &split.groups,
        classes,
        &options.lambda_grid,
        seed,
    )?;
    let mut prefix = Vec::new();
    if per_k {
        for k in 1..=bank.n_f() {
            let sub = feats.rows(0, k).into_owned();
            prefix.push(
                classify(
                    &sub,
                    labels,
                    &train,
                    &test,
                    &split.groups,
                    classes,
                    &options.lambda_grid,
                    seed,
                )?
                .0,
            );
        }
    }
    Ok(FoldOutcome {
        bank,
        report,
        pairs,
        per_k: prefix,
        lambda,
    })
}

/// Grouped cross-validation of one bank source: per fold, design on the
/// training partition only, extract features for all samples, pick the ridge
/// strength on an inner grouped split, fit and score the held-out fold.
pub fn run_experiment(
    raw: &RawDataset,
    source: &BankSource,
    config: &SolverConfig,
    split: &GroupedSplit,
    options: &ExperimentOptions,
) -> Result<EvalReport> {
    let start = Instant::now();
    let labels = raw
        .class_labels()
        .ok_or_else(|| Error::Precondition("evaluation needs class labels".into()))?
        .to_vec();
    if split.fold_assignments.len() != raw.n_samples() {
        return Err(Error::DimensionMismatch(format!(
            "split covers {} samples, dataset has {}",
            split.fold_assignments.len(),
            raw.n_samples()
        )));
    }
    if options.lambda_grid.is_empty() || options.lambda_grid.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Config("lambda grid must be non-empty and positive".into()));
    }
    let method = source.method();
    let ordered = match source {
        BankSource::Design(m) => m.is_relevance_ordered(),
        BankSource::Fixed(b) => b.ordered_by_relevance,
    };
    let per_k = options.per_k && ordered;

    let outcomes: Vec<Result<FoldOutcome>> = (0..split.k)
        .into_par_iter()
        .map(|f| run_fold(raw, &labels, source, config, split, f, options, per_k))
        .collect();

    let classes = raw.n_targets();
    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut per_fold_oa = Vec::new();
    let mut lambdas = Vec::new();
    let mut failures = Vec::new();
    let mut reports = Vec::new();
    let mut first_bank: Option<FilterBank> = None;
    let mut prefix_pairs: Vec<Vec<(usize, usize)>> = Vec::new();
    for (fold, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(o) => {
                for &(t, p) in &o.pairs {
                    confusion[t][p] += 1;
                }
                per_fold_oa.push(accuracy(&o.pairs));
                lambdas.push(o.lambda);
                if prefix_pairs.is_empty() {
                    prefix_pairs = vec![Vec::new(); o.per_k.len()];
                }
                for (acc, p) in prefix_pairs.iter_mut().zip(o.per_k) {
                    acc.extend(p);
                }
                reports.extend(o.report);
                first_bank.get_or_insert(o.bank);
            }
            Err(e) => {
                log::warn!("{method}: fold {fold} failed: {e}");
                failures.push(FoldFailure {
                    fold,
                    message: e.to_string(),
                });
            }
        }
    }
    let Some(bank) = first_bank else {
        return Err(Error::Precondition(format!(
            "{method}: every fold failed ({})",
            failures
                .first()
                .map(|f| f.message.as_str())
                .unwrap_or("no folds")
        )));
    };

    let total: usize = confusion.iter().flatten().sum();
    let correct: usize = (0..classes).map(|i| confusion[i][i]).sum();
    let n_ref = options.n_ref.unwrap_or(classes);
    let nz = nz_rate(&bank, None);
    Ok(EvalReport {
        method,
        n_f: bank.n_f(),
        oa_percent: 100.0 * correct as f64 / total.max(1) as f64,
        mean_fold_oa: per_fold_oa.iter().sum::<f64>() / per_fold_oa.len() as f64,
        per_fold_oa,
        nz,
        im: interpretability(nz, bank.n_f(), n_ref).ok(),
        n_ref,
        confusion,
        lambdas,
        oa_per_k: per_k.then(|| prefix_pairs.iter().map(|p| accuracy(p)).collect()),
        truncation_meaningful: ordered,
        solver_reports: reports,
        failures,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
