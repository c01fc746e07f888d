//! Plain-text matrix, label and group files.
//!
//! Matrices are UTF-8 CSV, one matrix row per line, no header. An optional
//! sidecar `<file>.json` descriptor records the shape and semantic role.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDescriptor {
    pub rows: usize,
    pub cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Parse CSV text into a matrix. `source_name` is used in diagnostics.
pub fn parse_matrix(text: &str, source_name: &str) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            field: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (field, value) in record.iter().enumerate() {
            let v: f64 = value.parse().map_err(|_| Error::Parse {
                source_name: source_name.to_string(),
                line,
                field: field + 1,
                message: format!("'{value}' is not a number"),
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    source_name: source_name.to_string(),
                    line,
                    field: row.len().min(first.len()) + 1,
                    message: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            source_name: source_name.to_string(),
            line: 1,
            field: 0,
            message: "no data rows".into(),
        });
    }
    let ncols = rows[0].len();
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}

/// Read a CSV matrix, checking it against a sidecar descriptor when present.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let m = parse_matrix(&text, &path.display().to_string())?;
    let side = sidecar_path(path);
    if side.exists() {
        let desc: MatrixDescriptor = serde_json::from_str(&fs::read_to_string(&side)?)?;
        if desc.rows != m.nrows() || desc.cols != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} holds {}x{} but its descriptor says {}x{}",
                path.display(),
                m.nrows(),
                m.ncols(),
                desc.rows,
                desc.cols
            )));
        }
    }
    Ok(m)
}

/// Format a matrix as CSV. Values use the shortest representation that
/// round-trips exactly.
pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", m[(r, c)]);
        }
        out.push('\n');
    }
    out
}

/// Write `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>, role: Option<&str>) -> Result<()> {
    write_atomic(path, format_matrix(m).as_bytes())?;
    if let Some(role) = role {
        let desc = MatrixDescriptor {
            rows: m.nrows(),
            cols: m.ncols(),
            role: Some(role.to_string()),
        };
        write_atomic(&sidecar_path(path), serde_json::to_string_pretty(&desc)?.as_bytes())?;
    }
    Ok(())
}

/// One integer label per line; blank lines are skipped.
pub fn parse_labels(text: &str, source_name: &str) -> Result<Vec<i64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        out.push(t.parse().map_err(|_| Error::Parse {
            source_name: source_name.to_string(),
            line: i + 1,
            field: 1,
            message: format!("'{t}' is not an integer label"),
        })?);
    }
    Ok(out)
}

pub fn read_labels(path: &Path) -> Result<Vec<i64>> {
    parse_labels(&fs::read_to_string(path)?, &path.display().to_string())
}

/// One group identifier per line (any non-empty string).
pub fn read_groups(path: &Path) -> Result<Vec<String>> {
    Ok(fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

pub fn format_lines<T: std::fmt::Display>(items: &[T]) -> String {
    let mut out = String::new();
    for it in items {
        let _ = writeln!(out, "{it}");
    }
    out
}
