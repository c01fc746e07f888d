//! Supervised design of non-negative filter banks for spectral features.
//!
//! Given non-negative spectral inputs `X` (`n × N`) and targets `Y` (`m × N`),
//! the solvers find a bank `U ≥ 0` (`n × n_f`) and a regression matrix `W`
//! minimising `‖Y − W Uᵀ X‖²_F`. The bank is then applied as a feature
//! extractor (`x′ = Uᵀx`) ahead of a classifier.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod filterbank;
pub mod io;
pub mod linalg;
pub mod nnls;
pub mod preprocess;
pub mod solvers;
pub mod synthetic;

pub use error::{Error, Result};
