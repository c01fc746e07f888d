use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::{FftDirection, FftPlanner};

use super::GrayImage;
use crate::error::{Error, Result};

/// Decimated centred energy spectrum of one image, row-major over a
/// `grid × grid` block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumVector {
    pub values: DVector<f64>,
    pub grid: usize,
}

fn transform(input: &DMatrix<Complex<f64>>, direction: FftDirection) -> DMatrix<Complex<f64>> {
    let (h, w) = input.shape();
    let mut planner = FftPlanner::new();
    let mut out = input.clone();
    let row_fft = planner.plan_fft(w, direction);
    let mut buf = vec![Complex::new(0.0, 0.0); w];
    for r in 0..h {
        for c in 0..w {
            buf[c] = out[(r, c)];
        }
        row_fft.process(&mut buf);
        for c in 0..w {
            out[(r, c)] = buf[c];
        }
    }
    let col_fft = planner.plan_fft(h, direction);
    for mut col in out.column_iter_mut() {
        // nalgebra stores columns contiguously
        col_fft.process(col.as_mut_slice());
    }
    out
}

/// Unnormalised 2-D DFT `F[k,l] = Σ x[r,c] e^{−2πi(kr/h + lc/w)}`.
pub fn dft2(pixels: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
    transform(&pixels.map(|v| Complex::new(v, 0.0)), FftDirection::Forward)
}

/// Inverse of [`dft2`], including the `1/(h·w)` factor.
pub fn idft2(spectrum: &DMatrix<Complex<f64>>) -> DMatrix<Complex<f64>> {
    let scale = 1.0 / spectrum.len() as f64;
    transform(spectrum, FftDirection::Inverse).map(|z| z * scale)
}

/// Mean-removed energy spectrum `|F|²`, quadrant-swapped so zero frequency
/// sits at `(side/2, side/2)`, averaged over non-overlapping blocks down to
/// `rho × rho` and flattened row-major.
pub fn image_to_spectrum(image: &GrayImage, rho: usize) -> Result<SpectrumVector> {
    let (h, w) = image.pixels.shape();
    if h != w {
        return Err(Error::Preprocess(format!(
            "{}: spectrum needs a square image, got {h}×{w}",
            image.provenance
        )));
    }
    if rho == 0 || h % rho != 0 {
        return Err(Error::Preprocess(format!(
            "{}: side {h} is not divisible by grid {rho}",
            image.provenance
        )));
    }
    let mean = image.pixels.mean();
    let f = dft2(&image.pixels.map(|v| v - mean));
    let side = h;
    let half = side / 2;
    let block = side / rho;
    let area = (block * block) as f64;
    let mut values = DVector::zeros(rho * rho);
    for r in 0..side {
        for c in 0..side {
            // shifted position of unshifted bin (r, c)
            let sr = (r + half) % side;
            let sc = (c + half) % side;
            values[(sr / block) * rho + sc / block] += f[(r, c)].norm_sqr();
        }
    }
    values /= area;
    Ok(SpectrumVector { values, grid: rho })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_dft(x: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
        let (h, w) = x.shape();
        DMatrix::from_fn(h, w, |k, l| {
            let mut acc = Complex::new(0.0, 0.0);
            for r in 0..h {
                for c in 0..w {
                    let ang = -2.0 * PI * ((k * r) as f64 / h as f64 + (l * c) as f64 / w as f64);
                    acc += Complex::from_polar(x[(r, c)], ang);
                }
            }
            acc
        })
    }

    #[test]
    fn matches_direct_summation() {
        let x = DMatrix::from_fn(6, 10, |r, c| ((r * 7 + c * 3) % 5) as f64 * 0.2);
        let a = dft2(&x);
        let b = naive_dft(&x);
        assert!(a.iter().zip(b.iter()).all(|(p, q)| (p - q).norm() < 1e-10));
        let back = idft2(&a);
        assert!(back.iter().zip(x.iter()).all(|(z, v)| (z.re - v).abs() < 1e-12 && z.im.abs() < 1e-12));
    }

    #[test]
    fn grid_length_and_constant_image() {
        let g = GrayImage::new(DMatrix::from_element(120, 120, 0.3), "c").unwrap();
        let s = image_to_spectrum(&g, 12).unwrap();
        assert_eq!(s.values.len(), 144);
        assert!(s.values.amax() < 1e-12);
    }

    #[test]
    fn rejects_bad_shapes() {
        let g = GrayImage::new(DMatrix::from_element(12, 10, 0.3), "c").unwrap();
        assert!(image_to_spectrum(&g, 2).is_err());
        let g = GrayImage::new(DMatrix::from_element(12, 12, 0.3), "c").unwrap();
        assert!(image_to_spectrum(&g, 5).is_err());
    }
}
