//! The filter-bank artifact and everything that consumes it: feature
//! extraction, interpretability metrics, fixed baseline banks and persistence.

mod gabor;
mod metrics;
mod persist;
mod philips;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gabor::{gabor_bank, gabor_image_features, gabor_response, GaborParams};
pub use metrics::{
    default_zero_threshold, interpretability, nz_rate, reconstruction_loss, trace_loss,
};
pub use persist::{load_bank, parse_bank, render_bank, save_bank};
pub use philips::{philips_bank, philips_band, DEFAULT_FRAME_RATE_HZ};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Nopls,
    Pnopls,
    Defnopls,
    NmfOpls,
    Popls,
    Opls,
    Gabor,
    Philips,
}

impl Method {
    pub const DESIGNED: [Method; 6] = [
        Method::Nopls,
        Method::Pnopls,
        Method::Defnopls,
        Method::NmfOpls,
        Method::Popls,
        Method::Opls,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Nopls => "nopls",
            Method::Pnopls => "pnopls",
            Method::Defnopls => "defnopls",
            Method::NmfOpls => "nmf_opls",
            Method::Popls => "popls",
            Method::Opls => "opls",
            Method::Gabor => "gabor",
            Method::Philips => "philips",
        }
    }

    /// Whether the bank must be elementwise non-negative.
    pub fn is_constrained(self) -> bool {
        !matches!(self, Method::Opls)
    }

    /// Whether truncating to the first k filters is meaningful.
    pub fn is_relevance_ordered(self) -> bool {
        matches!(self, Method::Nopls | Method::Defnopls | Method::Popls | Method::Opls)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "nopls" => Method::Nopls,
            "pnopls" => Method::Pnopls,
            "defnopls" => Method::Defnopls,
            "nmf_opls" => Method::NmfOpls,
            "popls" => Method::Popls,
            "opls" => Method::Opls,
            "gabor" => Method::Gabor,
            "philips" => Method::Philips,
            other => return Err(Error::Config(format!("unknown method '{other}'"))),
        })
    }
}

/// How the bank's input vectors were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Preproc {
    #[default]
    None,
    /// Decimated centred 2-D energy spectrum on a `rho × rho` grid.
    ImageGrid { rho: usize },
    /// Concatenated periodograms of `n_coeffs` series, each of length `d`.
    Periodogram { d: usize, n_coeffs: usize },
}

impl Preproc {
    pub fn expected_dim(&self) -> Option<usize> {
        match *self {
            Preproc::None => None,
            Preproc::ImageGrid { rho } => Some(rho * rho),
            Preproc::Periodogram { d, n_coeffs } => Some(d * n_coeffs),
        }
    }
}

/// An `n × n_f` bank whose columns are filter frequency responses.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub u: DMatrix<f64>,
    pub method: Method,
    pub ordered_by_relevance: bool,
    pub preproc: Preproc,
    pub mu_x: Option<DVector<f64>>,
    /// All-zero columns that are known to be degenerate.
    pub degenerate_columns: Vec<usize>,
}

impl FilterBank {
    pub fn new(u: DMatrix<f64>, method: Method) -> Result<Self> {
        let bank = FilterBank {
            ordered_by_relevance: method.is_relevance_ordered(),
            degenerate_columns: crate::linalg::zero_columns(&u),
            u,
            method,
            preproc: Preproc::None,
            mu_x: None,
        };
        bank.validate()?;
        Ok(bank)
    }

    pub fn with_preproc(mut self, preproc: Preproc) -> Result<Self> {
        self.preproc = preproc;
        self.validate()?;
        Ok(self)
    }

    pub fn with_mu_x(mut self, mu_x: DVector<f64>) -> Result<Self> {
        self.mu_x = Some(mu_x);
        self.validate()?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn n_f(&self) -> usize {
        self.u.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.u.nrows() == 0 || self.u.ncols() == 0 {
            return Err(Error::Invariant("filter bank is empty".into()));
        }
        if self.u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("filter bank has non-finite entries".into()));
        }
        if self.method.is_constrained() {
            if let Some(pos) = self.u.iter().position(|&v| v < 0.0) {
                let (r, c) = (pos % self.u.nrows(), pos / self.u.nrows());
                return Err(Error::Invariant(format!(
                    "{} bank has negative entry {} at ({r}, {c})",
                    self.method,
                    self.u[(r, c)]
                )));
            }
        }
        for j in crate::linalg::zero_columns(&self.u) {
            if !self.degenerate_columns.contains(&j) {
                return Err(Error::Invariant(format!(
                    "column {j} is all zero but not flagged degenerate"
                )));
            }
        }
        if let Some(dim) = self.preproc.expected_dim() {
            if dim != self.n() {
                return Err(Error::DimensionMismatch(format!(
                    "preprocessing descriptor implies n = {dim}, bank has n = {}",
                    self.n()
                )));
            }
        }
        if let Some(mu) = &self.mu_x {
            if mu.len() != self.n() {
                return Err(Error::DimensionMismatch(format!(
                    "mu_x has length {}, bank has n = {}",
                    mu.len(),
                    self.n()
                )));
            }
        }
        Ok(())
    }

    /// Bank restricted to its first `k` filters.
    pub fn truncated(&self, k: usize) -> FilterBank {
        let k = k.min(self.n_f());
        FilterBank {
            u: self.u.columns(0, k).into_owned(),
            method: self.method,
            ordered_by_relevance: self.ordered_by_relevance,
            preproc: self.preproc.clone(),
            mu_x: self.mu_x.clone(),
            degenerate_columns: self
                .degenerate_columns
                .iter()
                .copied()
                .filter(|&j| j < k)
                .collect(),
        }
    }

    /// Number of strictly positive (above threshold) coefficients per filter.
    pub fn support_sizes(&self, zero_threshold: f64) -> Vec<usize> {
        self.u
            .column_iter()
            .map(|c| c.iter().filter(|v| v.abs() > zero_threshold).count())
            .collect()
    }
}

/// Features `x′ = Uᵀx` plus the offset `Uᵀμx` that recovers uncentered
/// features from centered ones.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub x_prime: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl FeatureMatrix {
    /// `x_prime + offset`, broadcast over samples.
    pub fn uncentered(&self) -> DMatrix<f64> {
        let mut out = self.x_prime.clone();
        for mut c in out.column_iter_mut() {
            c += &self.offset;
        }
        out
    }
}

pub fn extract(bank: &FilterBank, x: &DMatrix<f64>, mu_x: &DVector<f64>) -> Result<FeatureMatrix> {
    if x.nrows() != bank.n() || mu_x.len() != bank.n() {
        return Err(Error::DimensionMismatch(format!(
            "bank expects {} input rows, data has {} (mean length {})",
            bank.n(),
            x.nrows(),
            mu_x.len()
        )));
    }
    let ut = bank.u.transpose();
    Ok(FeatureMatrix {
        x_prime: &ut * x,
        offset: &ut * mu_x,
    })
}
