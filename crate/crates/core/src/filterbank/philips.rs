use nalgebra::DMatrix;

use super::{FilterBank, Method, Preproc};
use crate::error::{Error, Result};

/// Frame rate of a 7.5 ms hop.
pub const DEFAULT_FRAME_RATE_HZ: f64 = 400.0 / 3.0;

/// Band index (0…3) for a modulation frequency, or `None` when it falls in no
/// band. Band 0 is DC only; the others are `[0, 2)`, `[3, 15)` and `[20, ∞)`
/// Hz with DC excluded.
pub fn philips_band(hz: f64) -> Option<usize> {
    if hz == 0.0 {
        Some(0)
    } else if hz > 0.0 && hz < 2.0 {
        Some(1)
    } else if (3.0..15.0).contains(&hz) {
        Some(2)
    } else if hz >= 20.0 {
        Some(3)
    } else {
        None
    }
}

/// Fixed four-band indicator bank over periodograms of length `d`, stacked
/// block-diagonally for `n_coeffs` coefficient series (`n = n_coeffs·d`,
/// `n_f = 4·n_coeffs`).
pub fn philips_bank(d: usize, frame_rate_hz: f64, n_coeffs: usize) -> Result<FilterBank> {
    if d < 2 {
        return Err(Error::Config(format!("periodogram length must be ≥ 2, got {d}")));
    }
    if n_coeffs == 0 || !(frame_rate_hz > 0.0) {
        return Err(Error::Config("need at least one coefficient and a positive frame rate".into()));
    }
    let mut u = DMatrix::zeros(d * n_coeffs, 4 * n_coeffs);
    for k in 0..d {
        let hz = k as f64 * frame_rate_hz / (2.0 * (d - 1) as f64);
        if let Some(b) = philips_band(hz) {
            for c in 0..n_coeffs {
                u[(c * d + k, c * 4 + b)] = 1.0;
            }
        }
    }
    let mut bank = FilterBank::new(u, Method::Philips)?;
    bank.ordered_by_relevance = false;
    bank.with_preproc(Preproc::Periodogram { d, n_coeffs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_block_shape_and_bands() {
        let b = philips_bank(129, DEFAULT_FRAME_RATE_HZ, 1).unwrap();
        assert_eq!(b.u.shape(), (129, 4));
        let col = |j: usize| -> Vec<usize> { (0..129).filter(|&k| b.u[(k, j)] == 1.0).collect() };
        assert_eq!(col(0), vec![0]);
        assert_eq!(col(1), vec![1, 2, 3]);
        assert_eq!(col(2), (6..=28).collect::<Vec<_>>());
        assert_eq!(col(3), (39..=128).collect::<Vec<_>>());
    }

    #[test]
    fn gap_bins_are_empty() {
        let b = philips_bank(129, DEFAULT_FRAME_RATE_HZ, 1).unwrap();
        for k in 0..129 {
            let hz = k as f64 * DEFAULT_FRAME_RATE_HZ / 256.0;
            let total: f64 = b.u.row(k).sum();
            assert!(total <= 1.0);
            if (15.0..20.0).contains(&hz) {
                assert_eq!(total, 0.0, "bin {k} at {hz} Hz");
            }
        }
    }

    #[test]
    fn columns_orthogonal_indicators() {
        let b = philips_bank(129, DEFAULT_FRAME_RATE_HZ, 6).unwrap();
        assert_eq!(b.u.shape(), (774, 24));
        assert!(b.u.iter().all(|&v| v == 0.0 || v == 1.0));
        let g = b.u.transpose() * &b.u;
        for i in 0..24 {
            for j in 0..24 {
                if i != j {
                    assert_eq!(g[(i, j)], 0.0);
                }
            }
        }
        let nz = crate::filterbank::nz_rate(&b, None);
        assert!((nz - 702.0 / (774.0 * 24.0)).abs() < 1e-15);
    }
}
