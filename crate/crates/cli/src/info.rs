use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use nalgebra::DMatrix;

use nnopls::filterbank::{
    default_zero_threshold, interpretability, load_bank, nz_rate, FilterBank, Preproc,
    DEFAULT_FRAME_RATE_HZ,
};
use nnopls::io::{write_atomic, write_matrix};

use crate::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct BankInfoArgs {
    bank: PathBuf,
    /// Reference bank size for the interpretability measure.
    #[arg(long)]
    nref: Option<usize>,
    /// Magnitudes at or below this count as zero (default 1e-10·max|u|).
    #[arg(long)]
    zero_threshold: Option<f64>,
    /// Write each filter reshaped to rho × rho as filter_<j>.csv here.
    #[arg(long)]
    heatmap_dir: Option<PathBuf>,
    /// Grid side for banks that do not record one.
    #[arg(long)]
    rho: Option<usize>,
    /// Write a frequency-response table (one row per input bin) here.
    #[arg(long)]
    response: Option<PathBuf>,
    /// Frame rate used to label periodogram bins in Hz.
    #[arg(long, default_value_t = DEFAULT_FRAME_RATE_HZ)]
    frame_rate: f64,
}

pub fn bank_info(a: &BankInfoArgs) -> CliResult {
    let bank = load_bank(&a.bank)?;
    print!("{}", summary(&bank, a.zero_threshold, a.nref)?);
    if let Some(dir) = &a.heatmap_dir {
        dump_heatmaps(&bank, a.rho, dir)?;
    }
    if let Some(path) = &a.response {
        write_atomic(path, response_table(&bank, a.frame_rate).as_bytes())?;
    }
    Ok(())
}

fn describe(p: &Preproc) -> String {
    match p {
        Preproc::None => "none".into(),
        Preproc::ImageGrid { rho } => format!("image grid {rho}x{rho}"),
        Preproc::Periodogram { d, n_coeffs } => format!("{n_coeffs} periodograms of {d} bins"),
    }
}

pub fn summary(bank: &FilterBank, zero_threshold: Option<f64>, nref: Option<usize>) -> CliResult<String> {
    let thr = zero_threshold.unwrap_or_else(|| default_zero_threshold(bank));
    let nz = nz_rate(bank, Some(thr));
    let mut s = String::new();
    let _ = writeln!(s, "method   {}", bank.method);
    let _ = writeln!(s, "n        {}", bank.n());
    let _ = writeln!(s, "n_f      {}", bank.n_f());
    let _ = writeln!(s, "ordered  {}", if bank.ordered_by_relevance { "yes" } else { "no" });
    let _ = writeln!(s, "preproc  {}", describe(&bank.preproc));
    let _ = writeln!(s, "NZ       {nz:.4}");
    match nref {
        Some(r) => {
            let im = interpretability(nz, bank.n_f(), r)?;
            let _ = writeln!(s, "IM       {im:.3} (n_ref {r})");
        }
        None => {
            let _ = writeln!(s, "IM       omitted (pass --nref to compute it)");
        }
    }
    let _ = writeln!(s, "filter   support");
    for (j, k) in bank.support_sizes(thr).iter().enumerate() {
        let _ = writeln!(s, "{j:<8} {k}");
    }
    Ok(s)
}

fn dump_heatmaps(bank: &FilterBank, rho: Option<usize>, dir: &std::path::Path) -> CliResult {
    let rho = match (&bank.preproc, rho) {
        (Preproc::ImageGrid { rho }, _) => *rho,
        (_, Some(r)) => r,
        _ => {
            return Err(CliError::Usage(
                "heatmaps need a square grid: the bank records none, pass --rho".into(),
            ))
        }
    };
    if rho * rho != bank.n() {
        return Err(CliError::Usage(format!(
            "bank has {} rows, a {rho}x{rho} grid needs {}",
            bank.n(),
            rho * rho
        )));
    }
    std::fs::create_dir_all(dir).map_err(nnopls::Error::from)?;
    for j in 0..bank.n_f() {
        // row-major layout: entry r·ρ + c is grid cell (r, c)
        let grid = DMatrix::from_fn(rho, rho, |r, c| bank.u[(r * rho + c, j)]);
        write_matrix(&dir.join(format!("filter_{j}.csv")), &grid, None)?;
    }
    Ok(())
}

/// CSV with one row per input coordinate, labelled by its frequency.
pub fn response_table(bank: &FilterBank, frame_rate_hz: f64) -> String {
    let mut out = String::new();
    let filters: Vec<String> = (0..bank.n_f()).map(|j| format!("f{j}")).collect();
    let head = match bank.preproc {
        Preproc::None => "index",
        Preproc::ImageGrid { .. } => "index,fy,fx",
        Preproc::Periodogram { .. } => "index,coeff,bin,hz",
    };
    let _ = writeln!(out, "{head},{}", filters.join(","));
    for i in 0..bank.n() {
        let _ = write!(out, "{i}");
        match bank.preproc {
            Preproc::None => {}
            Preproc::ImageGrid { rho } => {
                let f = |k: usize| (k as f64 + 0.5) / rho as f64 - 0.5;
                let _ = write!(out, ",{},{}", f(i / rho), f(i % rho));
            }
            Preproc::Periodogram { d, .. } => {
                let bin = i % d;
                let hz = bin as f64 * frame_rate_hz / (2.0 * (d.max(2) - 1) as f64);
                let _ = write!(out, ",{},{bin},{hz}", i / d);
            }
        }
        for j in 0..bank.n_f() {
            let _ = write!(out, ",{}", bank.u[(i, j)]);
        }
        out.push('\n');
    }
    out
}
