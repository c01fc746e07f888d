use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-frame coefficient trajectories, `c × L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSeries {
    pub coeffs: DMatrix<f64>,
    pub frame_rate_hz: f64,
}

impl FrameSeries {
    pub fn new(coeffs: DMatrix<f64>, frame_rate_hz: f64) -> Result<Self> {
        if coeffs.ncols() < 2 || coeffs.nrows() == 0 {
            return Err(Error::Preprocess(format!(
                "frame series needs at least one coefficient and two frames, got {}×{}",
                coeffs.nrows(),
                coeffs.ncols()
            )));
        }
        if !(frame_rate_hz > 0.0) {
            return Err(Error::Preprocess(format!("frame rate must be positive, got {frame_rate_hz}")));
        }
        Ok(FrameSeries {
            coeffs,
            frame_rate_hz,
        })
    }
}

#[derive(Debug, Deserialize)]
struct FrameSidecar {
    #[serde(default)]
    frame_rate_hz: Option<f64>,
    #[serde(default)]
    rows: Option<usize>,
    #[serde(default)]
    cols: Option<usize>,
}

/// Read a `c × L` CSV frame series. The frame rate comes from a `<file>.json`
/// sidecar (`{"frame_rate_hz": …}`) when present, else `default_rate_hz`.
pub fn read_frame_series(path: &Path, default_rate_hz: f64) -> Result<FrameSeries> {
    let name = path.display().to_string();
    let coeffs = crate::io::parse_matrix(&std::fs::read_to_string(path)?, &name)?;
    let side = crate::io::sidecar_path(path);
    let mut rate = default_rate_hz;
    if side.exists() {
        let meta: FrameSidecar = serde_json::from_str(&std::fs::read_to_string(&side)?)?;
        if meta.rows.is_some_and(|r| r != coeffs.nrows()) || meta.cols.is_some_and(|c| c != coeffs.ncols()) {
            return Err(Error::DimensionMismatch(format!(
                "{name} holds {}x{}, its sidecar disagrees",
                coeffs.nrows(),
                coeffs.ncols()
            )));
        }
        rate = meta.frame_rate_hz.unwrap_or(rate);
    }
    FrameSeries::new(coeffs, rate)
}

/// `P[k] = |Σ s[t] e^{−2πikt/L}|² / L` for `k = 0…L/2` (rectangular window).
pub fn periodogram(series: &[f64]) -> Result<DVector<f64>> {
    let l = series.len();
    if l < 2 || l % 2 != 0 {
        return Err(Error::Preprocess(format!(
            "periodogram needs an even length ≥ 2, got {l}"
        )));
    }
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(l).process(&mut buf);
    Ok(DVector::from_iterator(
        l / 2 + 1,
        buf[..=l / 2].iter().map(|z| z.norm_sqr() / l as f64),
    ))
}

/// Periodograms of the last `window_len` frames of every coefficient row,
/// concatenated in row order.
pub fn integrate_frames(series: &FrameSeries, window_len: usize) -> Result<DVector<f64>> {
    let l = series.coeffs.ncols();
    if window_len > l {
        return Err(Error::Preprocess(format!(
            "window of {window_len} frames is longer than the series ({l})"
        )));
    }
    let d = window_len / 2 + 1;
    let mut out = DVector::zeros(series.coeffs.nrows() * d);
    for (i, row) in series.coeffs.row_iter().enumerate() {
        let tail: Vec<f64> = row.iter().skip(l - window_len).copied().collect();
        out.rows_mut(i * d, d).copy_from(&periodogram(&tail)?);
    }
    Ok(out)
}
