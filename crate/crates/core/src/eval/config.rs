use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::experiment::{BankSource, EvalReport, ExperimentOptions, DEFAULT_LAMBDA_GRID};
use crate::dataset::RawDataset;
use crate::error::{Error, Result};
use crate::filterbank::{load_bank, Method};
use crate::io::{read_groups, read_labels, read_matrix};
use crate::solvers::SolverConfig;

/// An evaluation run as read from JSON. Relative paths resolve against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub inputs: PathBuf,
    pub labels: PathBuf,
    pub groups: PathBuf,
    #[serde(default)]
    pub classes: Option<usize>,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    /// Pre-built banks (Gabor, Philips, earlier designs) evaluated as-is.
    #[serde(default)]
    pub banks: Vec<PathBuf>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default)]
    pub n_ref: Option<usize>,
    /// Filter count, or a list of counts to sweep. Overrides `solver.n_f`.
    #[serde(default)]
    pub n_f: Option<FilterCount>,
    #[serde(default)]
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FilterCount {
    One(usize),
    Grid(Vec<usize>),
}

fn all_methods() -> Vec<Method> {
    Method::DESIGNED.to_vec()
}

fn default_folds() -> usize {
    5
}

fn default_grid() -> Vec<f64> {
    DEFAULT_LAMBDA_GRID.to_vec()
}

/// A loaded config: the dataset, groups and the list of sources to run.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub dataset: RawDataset,
    pub groups: Vec<String>,
    pub sources: Vec<BankSource>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))
    }

    /// Filter counts to evaluate designed methods at.
    pub fn n_f_values(&self) -> Vec<usize> {
        match &self.n_f {
            None => vec![self.solver.n_f],
            Some(FilterCount::One(k)) => vec![*k],
            Some(FilterCount::Grid(ks)) => ks.clone(),
        }
    }

    pub fn options(&self) -> ExperimentOptions {
        ExperimentOptions {
            lambda_grid: self.lambda_grid.clone(),
            n_ref: self.n_ref,
            per_k: true,
            seed: self.seed,
        }
    }

    /// Reads every referenced file; `base` is the directory relative paths
    /// are taken from.
    pub fn load(self, base: &Path) -> Result<Experiment> {
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let x = read_matrix(&resolve(&self.inputs))?;
        let labels = read_labels(&resolve(&self.labels))?;
        let groups = read_groups(&resolve(&self.groups))?;
        if labels.len() != x.ncols() || groups.len() != x.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples, {} labels, {} groups",
                x.ncols(),
                labels.len(),
                groups.len()
            )));
        }
        let classes = match self.classes {
            Some(c) => c,
            None => labels.iter().copied().max().map_or(0, |m| m.max(0) as usize + 1),
        };
        let dataset = RawDataset::with_labels(x, &labels, classes)?;
        let mut sources: Vec<BankSource> = self.methods.iter().map(|&m| BankSource::Design(m)).collect();
        for p in &self.banks {
            sources.push(BankSource::Fixed(load_bank(&resolve(p))?));
        }
        if self.n_f_values().is_empty() {
            return Err(Error::Config("empty n_f grid".into()));
        }
        if sources.is_empty() {
            return Err(Error::Config("nothing to evaluate: no methods and no banks".into()));
        }
        Ok(Experiment {
            config: self,
            dataset,
            groups,
            sources,
        })
    }
}

pub fn load_experiment(path: &Path) -> Result<Experiment> {
    let text = std::fs::read_to_string(path)?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    cfg.load(base)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

/// One row per report.
pub fn summary_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("method,n_f,oa_percent,mean_fold_oa,nz,im,n_ref,failed_folds\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.method,
            r.n_f,
            r.oa_percent,
            r.mean_fold_oa,
            r.nz,
            fmt_opt(r.im),
            r.n_ref,
            r.failures.len()
        ));
    }
    out
}

/// Accuracy against the number of leading filters, for ordered banks only.
pub fn curve_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("method,k,oa_percent\n");
    for r in reports {
        if let Some(per_k) = &r.oa_per_k {
            for (k, oa) in per_k.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", r.method, k + 1, oa));
            }
        }
    }
    out
}

/// Per-fold accuracies and chosen ridge strengths, one row per method, n_f
/// and successful fold.
pub fn folds_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("method,n_f,fold,oa_percent,lambda\n");
    for r in reports {
        for ((fold, oa), l) in r.succeeded_folds().into_iter().zip(&r.per_fold_oa).zip(&r.lambdas) {
            out.push_str(&format!("{},{},{},{},{}\n", r.method, r.n_f, fold, oa, l));
        }
    }
    out
}
