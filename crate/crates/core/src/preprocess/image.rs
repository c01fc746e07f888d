use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Grey-level image with pixel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub pixels: DMatrix<f64>,
    /// Source path plus tile index, for diagnostics.
    pub provenance: String,
}

impl GrayImage {
    pub fn new(pixels: DMatrix<f64>, provenance: impl Into<String>) -> Result<Self> {
        if pixels.nrows() < 2 || pixels.ncols() < 2 {
            return Err(Error::Preprocess(format!(
                "image must be at least 2×2, got {}×{}",
                pixels.nrows(),
                pixels.ncols()
            )));
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(Error::Preprocess("image has non-finite pixels".into()));
        }
        Ok(GrayImage {
            pixels,
            provenance: provenance.into(),
        })
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }
}

/// Load a PGM/PPM image or a CSV pixel matrix (chosen by extension).
/// Colour pixmaps are converted with 0.299/0.587/0.114 weights.
pub fn load_image(path: &Path) -> Result<GrayImage> {
    let name = path.display().to_string();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let pixels = match ext.as_str() {
        "csv" | "txt" => crate::io::read_matrix(path)?,
        "pgm" | "ppm" | "pnm" | "pbm" | "pam" => {
            let img = ::image::open(path)?;
            let (w, h) = (img.width() as usize, img.height() as usize);
            if img.color().has_color() {
                let rgb = img.to_rgb32f();
                DMatrix::from_fn(h, w, |r, c| {
                    let p = rgb.get_pixel(c as u32, r as u32).0;
                    0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
                })
            } else {
                let g = img.to_luma32f();
                DMatrix::from_fn(h, w, |r, c| g.get_pixel(c as u32, r as u32).0[0] as f64)
            }
        }
        other => {
            return Err(Error::Preprocess(format!(
                "{name}: unsupported image extension '{other}'"
            )))
        }
    };
    GrayImage::new(pixels, name)
}

/// Split into `rows × cols` equal tiles, row-major.
pub fn tile_image(image: &GrayImage, rows: usize, cols: usize) -> Result<Vec<GrayImage>> {
    let (h, w) = (image.height(), image.width());
    if rows == 0 || cols == 0 || h % rows != 0 || w % cols != 0 {
        return Err(Error::Preprocess(format!(
            "cannot tile a {h}×{w} image into {rows}×{cols} equal tiles"
        )));
    }
    let (th, tw) = (h / rows, w / cols);
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push(GrayImage::new(
                image.pixels.view((r * th, c * tw), (th, tw)).into_owned(),
                format!("{}#{}", image.provenance, r * cols + c),
            )?);
        }
    }
    Ok(out)
}
