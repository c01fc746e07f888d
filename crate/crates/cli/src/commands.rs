use std::path::{Path, PathBuf};

use clap::Args;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use nnopls::dataset::RawDataset;
use nnopls::eval::{
    curve_csv, folds_csv, grouped_kfold, load_experiment, run_experiment, summary_csv, BankSource,
    EvalReport,
};
use nnopls::filterbank::{
    extract as apply_bank, gabor_bank, load_bank, philips_bank, save_bank, GaborParams,
    Method, DEFAULT_FRAME_RATE_HZ,
};
use nnopls::io::{format_lines, read_labels, read_matrix, write_atomic, write_matrix};
use nnopls::preprocess::{image_to_spectrum, integrate_frames, load_image, read_frame_series, tile_image};
use nnopls::solvers::{self, SolverConfig, StopReason};

use crate::{parse_method, with_suffix, CliError, CliResult, SolverFlags};

#[derive(Debug, Args)]
pub struct ImageArgs {
    /// Image files; every tile of every image becomes one column.
    #[arg(required = true)]
    images: Vec<PathBuf>,
    /// Side of the decimated spectrum grid (n = rho²).
    #[arg(long, default_value_t = 12)]
    rho: usize,
    /// Tiling as ROWSxCOLS, e.g. 4x4.
    #[arg(long, default_value = "1x1", value_parser = parse_tiles)]
    tiles: (usize, usize),
    #[arg(long)]
    out: PathBuf,
    /// Also write one group id (the source image) per column.
    #[arg(long)]
    groups_out: Option<PathBuf>,
}

fn parse_tiles(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected ROWSxCOLS, got '{s}'"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("bad tile count '{v}'"));
    Ok((p(r)?, p(c)?))
}

pub fn preprocess_image(a: &ImageArgs) -> CliResult {
    let per_image: Vec<nnopls::Result<Vec<DVector<f64>>>> = a
        .images
        .par_iter()
        .map(|p| {
            let img = load_image(p)?;
            tile_image(&img, a.tiles.0, a.tiles.1)?
                .iter()
                .map(|t| image_to_spectrum(t, a.rho).map(|s| s.values))
                .collect()
        })
        .collect();
    let mut columns = Vec::new();
    let mut groups = Vec::new();
    for (path, spectra) in a.images.iter().zip(per_image) {
        let spectra = spectra?;
        groups.extend(std::iter::repeat_n(path.display().to_string(), spectra.len()));
        columns.extend(spectra);
    }
    let x = DMatrix::from_columns(&columns);
    write_matrix(&a.out, &x, Some("inputs"))?;
    if let Some(g) = &a.groups_out {
        write_atomic(g, format_lines(&groups).as_bytes())?;
    }
    log::info!("{} spectra of length {} written to {}", x.ncols(), x.nrows(), a.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct AudioArgs {
    /// Frame-series CSVs (coefficients × frames), one sample each.
    #[arg(required = true)]
    series: Vec<PathBuf>,
    /// Frames per periodogram (the most recent ones are used).
    #[arg(long, default_value_t = 256)]
    window: usize,
    /// Frame rate for files without a sidecar.
    #[arg(long, default_value_t = DEFAULT_FRAME_RATE_HZ)]
    frame_rate: f64,
    #[arg(long)]
    out: PathBuf,
}

pub fn integrate_audio(a: &AudioArgs) -> CliResult {
    let vectors: Vec<nnopls::Result<DVector<f64>>> = a
        .series
        .par_iter()
        .map(|p| integrate_frames(&read_frame_series(p, a.frame_rate)?, a.window))
        .collect();
    let vectors = vectors.into_iter().collect::<nnopls::Result<Vec<_>>>()?;
    if let Some((i, v)) = vectors.iter().enumerate().find(|(_, v)| v.len() != vectors[0].len()) {
        return Err(CliError::Usage(format!(
            "{} gives {} values but {} gives {}: coefficient counts differ",
            a.series[i].display(),
            v.len(),
            a.series[0].display(),
            vectors[0].len()
        )));
    }
    write_matrix(&a.out, &DMatrix::from_columns(&vectors), Some("inputs"))?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// Number of filters (required for designed methods).
    #[arg(long)]
    nf: Option<usize>,
    /// Inputs CSV, n × N.
    #[arg(long)]
    inputs: Option<PathBuf>,
    /// Integer class labels, one per line.
    #[arg(long, conflicts_with = "targets")]
    labels: Option<PathBuf>,
    /// Real-valued targets CSV, m × N.
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Class count (default: largest label + 1).
    #[arg(long)]
    classes: Option<usize>,
    /// Bank file to write.
    #[arg(long)]
    out: PathBuf,
    /// Solver report JSON (default: <out>.report.json).
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
    /// Gabor: spectrum grid side.
    #[arg(long, default_value_t = 12)]
    rho: usize,
    /// Philips: periodogram length per coefficient.
    #[arg(long, default_value_t = 129)]
    bins: usize,
    /// Philips: number of coefficient series.
    #[arg(long, default_value_t = 6)]
    coeffs: usize,
    /// Philips: frame rate of the series.
    #[arg(long, default_value_t = DEFAULT_FRAME_RATE_HZ)]
    frame_rate: f64,
}

fn load_dataset(a: &DesignArgs) -> CliResult<RawDataset> {
    let inputs = a
        .inputs
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("{} needs --inputs", a.method)))?;
    let x = read_matrix(inputs)?;
    if let Some(l) = &a.labels {
        let labels = read_labels(l)?;
        let classes = a
            .classes
            .unwrap_or_else(|| labels.iter().copied().max().map_or(0, |m| m.max(0) as usize + 1));
        Ok(RawDataset::with_labels(x, &labels, classes)?)
    } else if let Some(t) = &a.targets {
        Ok(RawDataset::new(x, read_matrix(t)?)?)
    } else {
        Err(CliError::Usage("pass either --labels or --targets".into()))
    }
}

#[derive(Serialize)]
struct FailedDesign<'a> {
    method: Method,
    error: &'a str,
}

pub fn design(a: &DesignArgs, seed: u64) -> CliResult {
    if matches!(a.method, Method::Gabor | Method::Philips) {
        if a.inputs.is_some() || a.labels.is_some() || a.targets.is_some() {
            return Err(CliError::Usage(format!("{} is a fixed bank and takes no data", a.method)));
        }
        let bank = match a.method {
            Method::Gabor => gabor_bank(a.rho, &GaborParams::default())?,
            _ => philips_bank(a.bins, a.frame_rate, a.coeffs)?,
        };
        save_bank(&bank, &a.out)?;
        return Ok(());
    }
    let n_f = a
        .nf
        .ok_or_else(|| CliError::Usage(format!("{} needs --nf", a.method)))?;
    let raw = load_dataset(a)?;
    let config = a.solver.config(n_f, seed);
    let report_path = a.report.clone().unwrap_or_else(|| with_suffix(&a.out, ".report.json"));
    match solvers::design(a.method, &raw, &config) {
        Ok(out) => {
            save_bank(&out.bank, &a.out)?;
            write_json(&report_path, &out.report)?;
            if out.report.stop_reason == StopReason::MaxIterations {
                return Err(CliError::Numerical(format!(
                    "{} stopped after {} iterations without meeting the tolerance; best iterate written to {}",
                    a.method,
                    out.report.outer_iterations,
                    a.out.display()
                )));
            }
            Ok(())
        }
        Err(e) if e.is_numerical() => {
            let msg = e.to_string();
            write_json(&report_path, &FailedDesign { method: a.method, error: &msg })?;
            Err(e.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).map_err(nnopls::Error::from)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    bank: PathBuf,
    /// Inputs CSV, n × N.
    #[arg(long)]
    inputs: PathBuf,
    /// Features CSV to write, n_f × N.
    #[arg(long)]
    out: PathBuf,
    /// Subtract the training mean stored in the bank before filtering.
    #[arg(long)]
    centered: bool,
}

pub fn extract(a: &ExtractArgs) -> CliResult {
    let bank = load_bank(&a.bank)?;
    let mut x = read_matrix(&a.inputs)?;
    if a.centered {
        let mu = bank
            .mu_x
            .as_ref()
            .ok_or_else(|| CliError::Usage(format!("{} stores no training mean", a.bank.display())))?;
        if mu.len() == x.nrows() {
            for mut col in x.column_iter_mut() {
                col -= mu;
            }
        }
    }
    let feats = apply_bank(&bank, &x, &DVector::zeros(x.nrows()))?;
    write_matrix(&a.out, &feats.x_prime, Some("features"))?;
    Ok(())
}

/// Everything `evaluate` writes to `report.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct Evaluation {
    pub seed: u64,
    pub folds: usize,
    pub reports: Vec<EvalReport>,
    /// Sources for which no fold produced a bank.
    pub failed_sources: Vec<SourceFailure>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SourceFailure {
    pub method: Method,
    pub n_f: usize,
    pub message: String,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Experiment config JSON.
    config: PathBuf,
    /// Directory for report.json, summary.csv, curve.csv and folds.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn evaluate(a: &EvaluateArgs, seed: Option<u64>) -> CliResult {
    let mut exp = load_experiment(&a.config)?;
    if let Some(s) = seed {
        exp.config.seed = s;
        exp.config.solver.seed = s;
    }
    let split = grouped_kfold(&exp.groups, exp.config.folds, exp.config.seed)?;
    let options = exp.config.options();
    let mut reports = Vec::new();
    let mut failed_sources = Vec::new();
    for source in &exp.sources {
        // fixed banks have their own width; only designed ones sweep n_f
        let widths = match source {
            BankSource::Design(_) => exp.config.n_f_values(),
            BankSource::Fixed(b) => vec![b.n_f()],
        };
        for n_f in widths {
            log::info!("evaluating {} at n_f = {n_f}", source.method());
            let solver = SolverConfig {
                n_f,
                ..exp.config.solver.clone()
            };
            match run_experiment(&exp.dataset, source, &solver, &split, &options) {
                Ok(r) => reports.push(r),
                Err(e @ (nnopls::Error::Precondition(_) | nnopls::Error::Convergence { .. } | nnopls::Error::Degenerate(_))) => {
                    failed_sources.push(SourceFailure {
                        method: source.method(),
                        n_f,
                        message: e.to_string(),
                    })
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    let evaluation = Evaluation {
        seed: exp.config.seed,
        folds: exp.config.folds,
        reports,
        failed_sources,
    };
    write_outputs(&evaluation, &a.out_dir)?;
    print_summary(&evaluation.reports);
    let failed_folds: usize = evaluation.reports.iter().map(|r| r.failures.len()).sum();
    if failed_folds > 0 || !evaluation.failed_sources.is_empty() {
        return Err(CliError::Numerical(format!(
            "{failed_folds} fold(s) and {} method(s) failed; see {}",
            evaluation.failed_sources.len(),
            a.out_dir.join("report.json").display()
        )));
    }
    Ok(())
}

fn write_outputs(e: &Evaluation, dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(nnopls::Error::from)?;
    write_json(&dir.join("report.json"), e)?;
    write_atomic(&dir.join("summary.csv"), summary_csv(&e.reports).as_bytes())?;
    write_atomic(&dir.join("curve.csv"), curve_csv(&e.reports).as_bytes())?;
    write_atomic(&dir.join("folds.csv"), folds_csv(&e.reports).as_bytes())?;
    Ok(())
}

fn print_summary(reports: &[EvalReport]) {
    println!("{:<10} {:>4} {:>8} {:>8} {:>7}", "method", "n_f", "OA%", "NZ", "IM");
    for r in reports {
        let im = r.im.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        println!(
            "{:<10} {:>4} {:>8.2} {:>8.4} {:>7}",
            r.method.as_str(),
            r.n_f,
            r.oa_percent,
            r.nz,
            im
        );
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// report.json written by `evaluate`.
    report: PathBuf,
    /// Where to write the CSV tables (default: next to the report).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

pub fn report(a: &ReportArgs) -> CliResult {
    let text = std::fs::read_to_string(&a.report).map_err(nnopls::Error::from)?;
    let evaluation: Evaluation = serde_json::from_str(&text).map_err(nnopls::Error::from)?;
    let dir = a
        .out_dir
        .clone()
        .or_else(|| a.report.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(nnopls::Error::from)?;
    write_atomic(&dir.join("summary.csv"), summary_csv(&evaluation.reports).as_bytes())?;
    write_atomic(&dir.join("curve.csv"), curve_csv(&evaluation.reports).as_bytes())?;
    write_atomic(&dir.join("folds.csv"), folds_csv(&evaluation.reports).as_bytes())?;
    print_summary(&evaluation.reports);
    for f in &evaluation.failed_sources {
        println!("{} at n_f = {}: failed ({})", f.method, f.n_f, f.message);
    }
    Ok(())
}
