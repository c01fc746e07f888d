//! `nnopls`: batch driver for filter-bank design and evaluation.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numerical failure.

mod commands;
mod info;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nnopls::filterbank::Method;
use nnopls::solvers::SolverConfig;

#[derive(Debug, Parser)]
#[command(name = "nnopls", version, about = "Design and evaluate non-negative filter banks")]
struct Cli {
    /// Seed for every random choice (splits, solver starts). Defaults to 0,
    /// or to the config file's seed for `evaluate`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Images (PGM/PPM/CSV) to decimated energy spectra, one column per tile.
    PreprocessImage(commands::ImageArgs),
    /// Frame-series CSVs to concatenated periodograms, one column per file.
    IntegrateAudio(commands::AudioArgs),
    /// Design a bank from a dataset, or build a fixed Gabor/Philips bank.
    Design(commands::DesignArgs),
    /// Apply a bank to an input matrix.
    Extract(commands::ExtractArgs),
    /// Grouped cross-validation as described by a JSON config.
    Evaluate(commands::EvaluateArgs),
    /// Re-render the CSV tables from an evaluation report.
    Report(commands::ReportArgs),
    /// Summarise a bank file; optionally dump heatmaps or a response table.
    BankInfo(info::BankInfoArgs),
}

/// Solver knobs shared by `design`.
#[derive(Debug, Clone, Args)]
pub struct SolverFlags {
    /// Stopping tolerance (method default when omitted).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Ridge added to Cxx (default 1e-8·Tr(Cxx)/n).
    #[arg(long)]
    ridge: Option<f64>,
    /// Random restarts for popls.
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    /// Initial points for nopls, pnopls and defnopls.
    #[arg(long, default_value_t = 4)]
    starts: usize,
    #[arg(long)]
    kkt_tol: Option<f64>,
}

impl SolverFlags {
    fn config(&self, n_f: usize, seed: u64) -> SolverConfig {
        SolverConfig {
            n_f,
            delta: self.delta,
            max_outer_iterations: self.max_iter,
            ridge_tau: self.ridge,
            popls_restarts: self.restarts,
            starts: self.starts,
            seed,
            kkt_tolerance: self.kkt_tol,
            ..SolverConfig::default()
        }
    }
}

pub fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|_| {
        format!("unknown method '{s}' (expected nopls, pnopls, defnopls, nmf_opls, popls, opls, gabor or philips)")
    })
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] nnopls::Error),
    #[error("{0}")]
    Usage(String),
    /// Outputs were written but a solver did not converge.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Numerical(_) => 3,
            _ => 2,
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

fn init_threads() -> CliResult {
    let Ok(v) = std::env::var("NNOPLS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("NNOPLS_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> CliResult {
    init_threads()?;
    let seed = cli.seed;
    match cli.command {
        Command::PreprocessImage(a) => commands::preprocess_image(&a),
        Command::IntegrateAudio(a) => commands::integrate_audio(&a),
        Command::Design(a) => commands::design(&a, seed.unwrap_or(0)),
        Command::Extract(a) => commands::extract(&a),
        Command::Evaluate(a) => commands::evaluate(&a, seed),
        Command::Report(a) => commands::report(&a),
        Command::BankInfo(a) => info::bank_info(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nnopls: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Path with `suffix` appended to the file name.
pub fn with_suffix(path: &std::path::Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
