//! Grouped cross-validation of filter banks with a ridge classifier.

mod config;
mod experiment;
mod ridge;
mod split;

pub use config::{curve_csv, folds_csv, load_experiment, summary_csv, Experiment, ExperimentConfig, FilterCount};
pub use experiment::{
    run_experiment, BankSource, EvalReport, ExperimentOptions, FoldFailure, DEFAULT_LAMBDA_GRID,
};
pub use ridge::{argmax, predict, ridge_fit, ridge_fit_eigen, LinearModel};
pub use split::{grouped_kfold, GroupedSplit};
