//! Seeded synthetic data: planted-bank regression instances and a small
//! three-class modulation-spectrum dataset with song-like groups.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::RawDataset;
use crate::error::{Error, Result};
use crate::preprocess::{integrate_frames, FrameSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedSpec {
    pub n: usize,
    pub n_f: usize,
    pub m: usize,
    pub n_samples: usize,
    /// Fraction of each column's entries that are non-zero.
    pub support_fraction: f64,
    pub snr_db: f64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            n: 50,
            n_f: 3,
            m: 5,
            n_samples: 500,
            support_fraction: 0.1,
            snr_db: 20.0,
        }
    }
}

/// `Y = W* U*ᵀ X + E` with sparse non-negative `U*` (disjoint column
/// supports), orthonormal `W*` and non-negative `X`.
#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub u_star: DMatrix<f64>,
    pub w_star: DMatrix<f64>,
    pub noise: DMatrix<f64>,
}

impl PlantedInstance {
    /// Squared Frobenius norm of the centred noise: the loss the true bank
    /// attains.
    pub fn noise_floor(&self) -> f64 {
        let mut e = self.noise.clone();
        for mut row in e.row_iter_mut() {
            let mean = row.mean();
            row.add_scalar_mut(-mean);
        }
        e.norm_squared()
    }

    /// Boolean support of the planted bank.
    pub fn support(&self) -> Vec<Vec<bool>> {
        self.u_star
            .column_iter()
            .map(|c| c.iter().map(|&v| v > 0.0).collect())
            .collect()
    }
}

pub fn planted_instance(spec: &PlantedSpec, seed: u64) -> Result<PlantedInstance> {
    let per_col = (spec.support_fraction * spec.n as f64).round() as usize;
    if spec.n_f == 0 || per_col == 0 || per_col * spec.n_f > spec.n {
        return Err(Error::Config(format!(
            "cannot place {} disjoint supports of size {per_col} in {} inputs",
            spec.n_f, spec.n
        )));
    }
    if spec.m < spec.n_f {
        return Err(Error::Config("orthonormal W* needs m ≥ n_f".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..spec.n).collect();
    idx.shuffle(&mut rng);
    let mut u_star = DMatrix::zeros(spec.n, spec.n_f);
    for j in 0..spec.n_f {
        for &i in &idx[j * per_col..(j + 1) * per_col] {
            u_star[(i, j)] = rng.random_range(0.5..1.5);
        }
    }
    let g = DMatrix::from_fn(spec.m, spec.n_f, |_, _| rng.sample::<f64, _>(StandardNormal));
    let w_star = g.qr().q().columns(0, spec.n_f).into_owned();
    let x = DMatrix::from_fn(spec.n, spec.n_samples, |_, _| rng.random::<f64>());
    let clean = &w_star * u_star.transpose() * &x;
    // SNR measured on the centred signal
    let mut centred = clean.clone();
    for mut row in centred.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    let power = centred.norm_squared() / (spec.m * spec.n_samples) as f64;
    let sigma = (power / 10f64.powf(spec.snr_db / 10.0)).sqrt();
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let noise = DMatrix::from_fn(spec.m, spec.n_samples, |_, _| normal.sample(&mut rng));
    Ok(PlantedInstance {
        y: clean + &noise,
        x,
        u_star,
        w_star,
        noise,
    })
}

/// Fraction of the planted support that is non-zero (above `threshold`) in
/// `u`, after greedily pairing each planted column with its most similar
/// recovered column.
pub fn support_recovery(u_star: &DMatrix<f64>, u: &DMatrix<f64>, threshold: f64) -> f64 {
    let mut free: Vec<usize> = (0..u.ncols()).collect();
    let mut hit = 0usize;
    let mut total = 0usize;
    for s in u_star.column_iter() {
        let support: Vec<usize> = (0..s.len()).filter(|&i| s[i] > 0.0).collect();
        total += support.len();
        let best = free
            .iter()
            .enumerate()
            .map(|(pos, &j)| {
                let c = u.column(j);
                let cos = s.dot(&c) / (s.norm() * c.norm()).max(f64::MIN_POSITIVE);
                (pos, j, cos)
            })
            .max_by(|a, b| a.2.total_cmp(&b.2));
        if let Some((pos, j, _)) = best {
            free.remove(pos);
            hit += support.iter().filter(|&&i| u[(i, j)].abs() > threshold).count();
        }
    }
    if total == 0 {
        1.0
    } else {
        hit as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandSpec {
    pub groups_per_class: usize,
    pub samples_per_group: usize,
    pub n_coeffs: usize,
    pub window_len: usize,
    pub frame_rate_hz: f64,
    /// Periodogram bins carrying the class-1 tone (coefficient 0).
    pub band_a: Range<usize>,
    /// Periodogram bins carrying the class-2 tone (last coefficient).
    pub band_b: Range<usize>,
    pub tone_amplitude: Range<f64>,
    /// Per-group background noise level (standard deviation).
    pub noise_level: Range<f64>,
}

impl Default for BandSpec {
    fn default() -> Self {
        BandSpec {
            groups_per_class: 10,
            samples_per_group: 10,
            n_coeffs: 2,
            window_len: 64,
            frame_rate_hz: crate::filterbank::DEFAULT_FRAME_RATE_HZ,
            band_a: 4..8,
            band_b: 14..18,
            tone_amplitude: 1.6..2.0,
            noise_level: 0.5..1.5,
        }
    }
}

impl BandSpec {
    pub fn bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    pub fn dim(&self) -> usize {
        self.n_coeffs * self.bins()
    }

    /// Indices of the concatenated feature vector that lie in a planted band.
    pub fn planted_indices(&self) -> Vec<usize> {
        let d = self.bins();
        let last = self.n_coeffs - 1;
        self.band_a
            .clone()
            .chain(self.band_b.clone().map(|k| last * d + k))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let d = self.bins();
        if self.n_coeffs == 0 || self.window_len < 4 || self.window_len % 2 != 0 {
            return Err(Error::Config("need ≥ 1 coefficient and an even window ≥ 4".into()));
        }
        for band in [&self.band_a, &self.band_b] {
            if band.is_empty() || band.start == 0 || band.end > d - 1 {
                return Err(Error::Config(format!("band {band:?} outside 1..{}", d - 1)));
            }
        }
        if !(self.noise_level.start > 0.0) || self.noise_level.is_empty() || self.tone_amplitude.is_empty() {
            return Err(Error::Config("noise level and tone amplitude ranges must be non-empty and positive".into()));
        }
        if self.groups_per_class == 0 || self.samples_per_group == 0 {
            return Err(Error::Config("empty dataset".into()));
        }
        Ok(())
    }
}

/// A labelled dataset with group identifiers.
#[derive(Debug, Clone)]
pub struct BandDataset {
    pub inputs: DMatrix<f64>,
    pub labels: Vec<i64>,
    pub groups: Vec<String>,
}

impl BandDataset {
    pub fn raw(&self) -> Result<RawDataset> {
        RawDataset::with_labels(self.inputs.clone(), &self.labels, 3)
    }
}

/// Three classes of noisy frame series: class 0 is noise only, class 1 adds
/// a tone in `band_a` of the first coefficient, class 2 a tone in `band_b`
/// of the last. Each sample is the concatenated periodogram. Groups come in
/// triples (one per class) sharing a background noise level.
pub fn band_dataset(spec: &BandSpec, seed: u64) -> Result<BandDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = spec.window_len;
    let n_samples = 3 * spec.groups_per_class * spec.samples_per_group;
    let mut inputs = DMatrix::zeros(spec.dim(), n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    let mut groups = Vec::with_capacity(n_samples);
    let mut col = 0;
    for g in 0..spec.groups_per_class {
        // one level per stratum, so the background carries no class signal
        let level = rng.random_range(spec.noise_level.clone());
        let noise = Normal::new(0.0, level).map_err(|e| Error::Config(format!("noise level: {e}")))?;
        for class in 0..3usize {
            let name = format!("song{:03}", g * 3 + class);
            for _ in 0..spec.samples_per_group {
                let mut coeffs = DMatrix::from_fn(spec.n_coeffs, l, |_, _| noise.sample(&mut rng));
                let tone = match class {
                    1 => Some((0, spec.band_a.clone())),
                    2 => Some((spec.n_coeffs - 1, spec.band_b.clone())),
                    _ => None,
                };
                if let Some((row, band)) = tone {
                    let k = rng.random_range(band) as f64;
                    let amp = rng.random_range(spec.tone_amplitude.clone());
                    let phase = rng.random_range(0.0..2.0 * PI);
                    for t in 0..l {
                        coeffs[(row, t)] += amp * (2.0 * PI * k * t as f64 / l as f64 + phase).cos();
                    }
                }
                let series = FrameSeries::new(coeffs, spec.frame_rate_hz)?;
                let v: DVector<f64> = integrate_frames(&series, l)?;
                inputs.set_column(col, &v);
                labels.push(class as i64);
                groups.push(name.clone());
                col += 1;
            }
        }
    }
    Ok(BandDataset {
        inputs,
        labels,
        groups,
    })
}

/// Share of the total coefficient mass `Σ|u|` that falls on `indices`.
pub fn mass_fraction(u: &DMatrix<f64>, indices: &[usize]) -> f64 {
    let total: f64 = u.iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let inside: f64 = indices.iter().map(|&i| u.row(i).iter().map(|v| v.abs()).sum::<f64>()).sum();
    inside / total
}
