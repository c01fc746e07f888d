//! Bank files: a JSON header, a `---` line, then the `n × n_f` matrix as CSV.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{FilterBank, Method, Preproc};
use crate::error::{Error, Result};
use crate::io::{format_matrix, parse_matrix, write_atomic};

const SEPARATOR: &str = "---";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    method: Method,
    n: usize,
    n_f: usize,
    ordered_by_relevance: bool,
    #[serde(default)]
    preproc: Preproc,
    #[serde(default)]
    mu_x: Option<Vec<f64>>,
    #[serde(default)]
    degenerate_columns: Vec<usize>,
}

pub fn render_bank(bank: &FilterBank) -> Result<String> {
    let header = Header {
        method: bank.method,
        n: bank.n(),
        n_f: bank.n_f(),
        ordered_by_relevance: bank.ordered_by_relevance,
        preproc: bank.preproc.clone(),
        mu_x: bank.mu_x.as_ref().map(|m| m.iter().copied().collect()),
        degenerate_columns: bank.degenerate_columns.clone(),
    };
    let mut out = serde_json::to_string_pretty(&header)?;
    out.push('\n');
    out.push_str(SEPARATOR);
    out.push('\n');
    out.push_str(&format_matrix(&bank.u));
    Ok(out)
}

pub fn parse_bank(text: &str, source_name: &str) -> Result<FilterBank> {
    let parse_err = |line: usize, message: String| Error::Parse {
        source_name: source_name.to_string(),
        line,
        field: 0,
        message,
    };
    let sep_line = text
        .lines()
        .position(|l| l.trim() == SEPARATOR)
        .ok_or_else(|| parse_err(1, format!("missing '{SEPARATOR}' separator line")))?;
    let mut lines = text.split_inclusive('\n');
    let header_text: String = lines.by_ref().take(sep_line).collect();
    lines.next();
    let body: String = lines.collect();

    let header: Header = serde_json::from_str(&header_text)
        .map_err(|e| parse_err(e.line(), format!("bad header: {e}")))?;
    let u = parse_matrix(&body, source_name).map_err(|e| match e {
        Error::Parse {
            source_name,
            line,
            field,
            message,
        } => Error::Parse {
            source_name,
            line: line + sep_line + 1,
            field,
            message,
        },
        other => other,
    })?;
    if u.shape() != (header.n, header.n_f) {
        return Err(Error::DimensionMismatch(format!(
            "{source_name}: header says {}x{}, payload is {}x{}",
            header.n,
            header.n_f,
            u.nrows(),
            u.ncols()
        )));
    }
    let bank = FilterBank {
        u,
        method: header.method,
        ordered_by_relevance: header.ordered_by_relevance,
        preproc: header.preproc,
        mu_x: header.mu_x.map(DVector::from_vec),
        degenerate_columns: header.degenerate_columns,
    };
    bank.validate()?;
    Ok(bank)
}

pub fn save_bank(bank: &FilterBank, path: &Path) -> Result<()> {
    bank.validate()?;
    write_atomic(path, render_bank(bank)?.as_bytes())
}

pub fn load_bank(path: &Path) -> Result<FilterBank> {
    let text = std::fs::read_to_string(path)?;
    parse_bank(&text, &path.display().to_string())
}
