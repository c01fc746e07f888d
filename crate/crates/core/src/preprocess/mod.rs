//! Turning raw images and per-frame coefficient series into the non-negative
//! spectral vectors the solvers consume.

mod image;
mod periodogram;
mod spectrum;

pub use self::image::{load_image, tile_image, GrayImage};
pub use periodogram::{integrate_frames, periodogram, read_frame_series, FrameSeries};
pub use spectrum::{dft2, idft2, image_to_spectrum, SpectrumVector};
