use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{FilterBank, Method, Preproc};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaborParams {
    pub n_freq: usize,
    pub n_orient: usize,
    pub freq_ratio: f64,
    pub gamma: f64,
    pub eta: f64,
    /// Highest centre frequency, cycles per pixel.
    pub max_freq: f64,
}

impl Default for GaborParams {
    fn default() -> Self {
        GaborParams {
            n_freq: 4,
            n_orient: 6,
            freq_ratio: std::f64::consts::SQRT_2,
            gamma: 0.5,
            eta: 0.5,
            max_freq: 0.4,
        }
    }
}

impl GaborParams {
    fn validate(&self) -> Result<()> {
        if self.n_freq == 0 || self.n_orient == 0 {
            return Err(Error::Config("Gabor bank needs at least one frequency and orientation".into()));
        }
        if !(self.freq_ratio > 1.0) || !(self.max_freq > 0.0) || !(self.gamma > 0.0) || !(self.eta > 0.0)
        {
            return Err(Error::Config(format!("invalid Gabor parameters {self:?}")));
        }
        Ok(())
    }

    /// `max_freq / ratioⁱ` for `i = 0…n_freq−1`.
    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_freq)
            .map(|i| self.max_freq / self.freq_ratio.powi(i as i32))
            .collect()
    }

    /// `kπ / n_orient` for `k = 0…n_orient−1`.
    pub fn orientations(&self) -> Vec<f64> {
        (0..self.n_orient)
            .map(|k| k as f64 * PI / self.n_orient as f64)
            .collect()
    }
}

/// Frequency response of a Gabor filter with centre frequency `f` and
/// orientation `theta` at the point `(u, v)` (horizontal, vertical; cycles
/// per pixel).
pub fn gabor_response(u: f64, v: f64, f: f64, theta: f64, gamma: f64, eta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let ur = u * c + v * s;
    let vr = -u * s + v * c;
    (-(PI * PI / (f * f)) * (gamma * gamma * (ur - f).powi(2) + eta * eta * vr * vr)).exp()
}

/// Centre frequency of block `r` on a `rho`-block centred grid.
fn block_freq(r: usize, rho: usize) -> f64 {
    (r as f64 + 0.5) / rho as f64 - 0.5
}

/// Gabor bank sampled on the `rho × rho` decimated centred spectrum grid
/// (row = vertical frequency, column = horizontal; row-major). Columns are
/// ordered frequency-major, orientation-minor.
pub fn gabor_bank(rho: usize, params: &GaborParams) -> Result<FilterBank> {
    if rho < 2 {
        return Err(Error::Config(format!("grid size must be at least 2, got {rho}")));
    }
    params.validate()?;
    let freqs = params.frequencies();
    let thetas = params.orientations();
    let mut u = DMatrix::zeros(rho * rho, freqs.len() * thetas.len());
    for (fi, &f) in freqs.iter().enumerate() {
        for (ti, &theta) in thetas.iter().enumerate() {
            let col = fi * thetas.len() + ti;
            for r in 0..rho {
                for c in 0..rho {
                    u[(r * rho + c, col)] = gabor_response(
                        block_freq(c, rho),
                        block_freq(r, rho),
                        f,
                        theta,
                        params.gamma,
                        params.eta,
                    );
                }
            }
        }
    }
    let mut bank = FilterBank::new(u, Method::Gabor)?;
    bank.ordered_by_relevance = false;
    bank.with_preproc(Preproc::ImageGrid { rho })
}

/// Classic Gabor texture features: filter the image in the frequency domain
/// with every bank member and return the mean and standard deviation of each
/// filtered image's magnitude (`2·n_freq·n_orient` values, means first).
pub fn gabor_image_features(pixels: &DMatrix<f64>, params: &GaborParams) -> Result<Vec<f64>> {
    use rustfft::num_complex::Complex;
    params.validate()?;
    let (h, w) = pixels.shape();
    if h < 2 || w < 2 {
        return Err(Error::Preprocess("image must be at least 2×2".into()));
    }
    let spectrum = crate::preprocess::dft2(pixels);
    let fv = |i: usize, len: usize| {
        // unshifted DFT index → signed frequency
        let k = if i < len.div_ceil(2) { i as f64 } else { i as f64 - len as f64 };
        k / len as f64
    };
    let mut means = Vec::new();
    let mut stds = Vec::new();
    for &f in &params.frequencies() {
        for &theta in &params.orientations() {
            let mut filtered = spectrum.clone();
            for r in 0..h {
                for c in 0..w {
                    let g = gabor_response(fv(c, w), fv(r, h), f, theta, params.gamma, params.eta);
                    filtered[(r, c)] *= Complex::new(g, 0.0);
                }
            }
            let img = crate::preprocess::idft2(&filtered);
            let mags: Vec<f64> = img.iter().map(|z| z.norm()).collect();
            let n = mags.len() as f64;
            let mean = mags.iter().sum::<f64>() / n;
            let var = mags.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / n;
            means.push(mean);
            stds.push(var.sqrt());
        }
    }
    means.extend(stds);
    Ok(means)
}
