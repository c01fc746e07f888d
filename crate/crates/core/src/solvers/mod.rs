//! Filter-bank design algorithms.
//!
//! All solvers minimise `‖Y − W Uᵀ X‖²_F` over a non-negative `U` (except the
//! unconstrained `opls_baseline`) and differ in how the regression matrix is
//! handled: joint eigen or Procrustes W-steps, one filter at a time with
//! deflation, multiplicative updates, or elimination of `W` altogether.

mod baseline;
mod defnopls;
mod nmf;
mod nndsvd;
mod nopls;
mod popls;
mod starts;
mod steps;

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{center, CenteredDataset, RawDataset};
use crate::error::{Error, Result};
use crate::filterbank::{FilterBank, Method};

pub use baseline::{opls_baseline, opls_unconstrained_alternation};
pub use defnopls::defnopls;
pub use nmf::{nmf_opls, NmfOutput};
pub use nndsvd::nndsvd_init;
pub use nopls::{nopls, pnopls};
pub use popls::{popls, popls_quotient};
pub use steps::{
    kronecker_init, procrustes_w, refit_loss, refit_w, relevance_order, schur_deflate, u_step, unidim_w,
    w_step, EigenPair, EXHAUSTIVE_ORDER_LIMIT,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub n_f: usize,
    /// Stopping tolerance. `None` selects the per-method default.
    pub delta: Option<f64>,
    pub max_outer_iterations: usize,
    pub epsilon_floor: f64,
    /// Ridge added before inverting `cxx`. `None` selects `1e-8·Tr(cxx)/n`.
    pub ridge_tau: Option<f64>,
    pub popls_restarts: usize,
    /// Initial points tried by nopls, pnopls and defnopls (per filter). The
    /// first is always the coordinate start; `1` disables the others.
    pub starts: usize,
    pub seed: u64,
    /// Forwarded to every NNLS call.
    pub kkt_tolerance: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n_f: 1,
            delta: None,
            max_outer_iterations: 1000,
            epsilon_floor: 1e-16,
            ridge_tau: None,
            popls_restarts: 4,
            starts: 4,
            seed: 0,
            kkt_tolerance: None,
        }
    }
}

impl SolverConfig {
    pub fn with_n_f(n_f: usize) -> Self {
        SolverConfig {
            n_f,
            ..Default::default()
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.n_f == 0 {
            return Err(Error::Config("n_f must be at least 1".into()));
        }
        if self.n_f > n {
            return Err(Error::Config(format!(
                "n_f = {} exceeds the input dimension n = {n}",
                self.n_f
            )));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(Error::Config(format!("delta must be positive, got {d}")));
            }
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::Config("max_outer_iterations must be at least 1".into()));
        }
        if !(self.epsilon_floor > 0.0) {
            return Err(Error::Config("epsilon_floor must be positive".into()));
        }
        if let Some(t) = self.ridge_tau {
            if !(t >= 0.0) {
                return Err(Error::Config(format!("ridge_tau must be non-negative, got {t}")));
            }
        }
        if self.popls_restarts == 0 || self.starts == 0 {
            return Err(Error::Config("popls_restarts and starts must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn ridge_for(&self, cxx: &DMatrix<f64>) -> f64 {
        self.ridge_tau
            .unwrap_or_else(|| 1e-8 * cxx.trace().max(0.0) / cxx.nrows().max(1) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxIterations,
    /// The cross-covariance was exhausted before `n_f` filters were found.
    DeflationExhausted,
    /// The projected cross-covariance vanished; nothing left to explain.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub method: Method,
    pub outer_iterations: usize,
    /// Objective after each outer iteration (after each filter for the
    /// sequential solvers).
    pub loss_trajectory: Vec<f64>,
    pub eigenvalue_trace_trajectory: Vec<f64>,
    pub stop_reason: StopReason,
    pub wall_time: f64,
    pub final_loss: f64,
    /// Set when column order carries no relevance information.
    pub unordered: bool,
    pub filters_extracted: usize,
    pub degenerate_columns: Vec<usize>,
    /// Columns of `W` that are zero padding (`n_f > m`).
    pub padded_columns: Vec<usize>,
    /// Iterations where the eigen W-step would have raised the loss and the
    /// exact (Procrustes) W-step was taken instead.
    pub w_step_fallbacks: usize,
    /// Which start produced the returned bank (0 = coordinate start).
    pub chosen_start: usize,
    /// `|ûⱼᵀ C_XY^(after j)|_∞ / ‖C_XY‖_F` for sequential solvers.
    pub deflation_residuals: Vec<f64>,
    /// Scale factor between the normalised factors and the fitted model
    /// (multiplicative updates only).
    pub output_scale: Option<f64>,
    pub warnings: Vec<String>,
}

impl SolverReport {
    pub(crate) fn new(method: Method) -> Self {
        SolverReport {
            method,
            outer_iterations: 0,
            loss_trajectory: Vec::new(),
            eigenvalue_trace_trajectory: Vec::new(),
            stop_reason: StopReason::Tolerance,
            wall_time: 0.0,
            final_loss: f64::NAN,
            unordered: !method.is_relevance_ordered(),
            filters_extracted: 0,
            degenerate_columns: Vec::new(),
            padded_columns: Vec::new(),
            w_step_fallbacks: 0,
            chosen_start: 0,
            deflation_residuals: Vec::new(),
            output_scale: None,
            warnings: Vec::new(),
        }
    }

    pub(crate) fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{}: {msg}", self.method);
        self.warnings.push(msg);
    }
}

/// A designed bank together with the regression matrix that accompanies it.
#[derive(Debug, Clone)]
pub struct SolverOutput {
    pub bank: FilterBank,
    pub w: DMatrix<f64>,
    pub report: SolverReport,
}

pub(crate) fn finish_bank(
    u: DMatrix<f64>,
    method: Method,
    mu_x: Option<&nalgebra::DVector<f64>>,
) -> Result<FilterBank> {
    let mut bank = FilterBank::new(u, method)?;
    if let Some(mu) = mu_x {
        bank = bank.with_mu_x(mu.clone())?;
    }
    Ok(bank)
}

/// Run any design method on a raw dataset. NMF-OPLS sees the uncentered data,
/// every other method the centered data.
pub fn design(method: Method, raw: &RawDataset, config: &SolverConfig) -> Result<SolverOutput> {
    let start = Instant::now();
    let centered = center(raw)?;
    let mut out = match method {
        Method::Nopls => nopls(&centered, config)?,
        Method::Pnopls => pnopls(&centered, config)?,
        Method::Defnopls => defnopls(&centered, config)?,
        Method::Popls => popls(&centered, config)?,
        Method::Opls => {
            let (u, w, report) = opls_baseline(&centered, config)?;
            SolverOutput {
                bank: finish_bank(u, Method::Opls, None)?,
                w,
                report,
            }
        }
        Method::NmfOpls => {
            let r = nmf_opls(raw, config)?;
            SolverOutput {
                bank: finish_bank(r.u, Method::NmfOpls, None)?,
                w: r.w,
                report: r.report,
            }
        }
        Method::Gabor | Method::Philips => {
            return Err(Error::Config(format!(
                "{method} is a fixed bank, not a design method"
            )))
        }
    };
    out.bank = out.bank.with_mu_x(centered.mu_x.clone())?;
    out.report.wall_time = start.elapsed().as_secs_f64();
    Ok(out)
}

/// Whether a deflated cross-covariance has nothing left beyond rounding noise.
pub(crate) fn exhausted(c: &DMatrix<f64>, original_norm: f64) -> bool {
    c.norm() <= 1e-11 * original_norm
}

/// Helper for the centered solvers: validate and compute covariances.
pub(crate) fn prepare(
    d: &CenteredDataset,
    config: &SolverConfig,
) -> Result<crate::dataset::CovarianceSet> {
    config.validate(d.n_inputs())?;
    Ok(crate::dataset::covariances(d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SolverConfig::with_n_f(3).validate(5).is_ok());
        assert!(SolverConfig::with_n_f(0).validate(5).is_err());
        assert!(SolverConfig::with_n_f(6).validate(5).is_err());
        let bad = SolverConfig {
            delta: Some(0.0),
            ..SolverConfig::with_n_f(1)
        };
        assert!(matches!(bad.validate(2), Err(Error::Config(_))));
    }

    #[test]
    fn config_json_defaults() {
        let c: SolverConfig = serde_json::from_str(r#"{"n_f": 4}"#).unwrap();
        assert_eq!(c.n_f, 4);
        assert_eq!(c.max_outer_iterations, 1000);
        assert_eq!(c.epsilon_floor, 1e-16);
    }

    #[test]
    fn fixed_banks_are_not_designed() {
        let raw = RawDataset::with_labels(DMatrix::from_element(2, 4, 1.0), &[0, 1, 0, 1], 2)
            .unwrap();
        assert!(design(Method::Gabor, &raw, &SolverConfig::default()).is_err());
    }
}
