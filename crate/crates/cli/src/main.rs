//! `symmix` command-line front end.

mod commands;
mod io;

use clap::{Args, Parser, Subcommand};
use io::Column;
use std::path::PathBuf;
use std::process::ExitCode;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid input or configuration (exit 2).
    Input(String),
    /// Numerical failure (exit 3).
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<symmix::Error> for CliError {
    fn from(e: symmix::Error) -> Self {
        use symmix::Error::*;
        match e {
            InvalidParameter(_) | InvalidSample(_) | InvalidGrid(_) => {
                CliError::Input(e.to_string())
            }
            DegenerateDensity(_) | Estimation(_) => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "symmix",
    version,
    about = "Semiparametric estimation of two-component symmetric location mixtures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate (λ, μ₁, μ₂) with unknown locations
    Fit(FitArgs),
    /// Estimate λ with known locations
    FitLambda(FitLambdaArgs),
    /// Write a simulated sample as CSV
    Simulate(SimulateArgs),
    /// Run a Monte Carlo study from a scenario file
    Montecarlo(MonteCarloArgs),
    /// Export F̂, f̃ and the reconstructed mixture density as TSV
    Curves(CurvesArgs),
    /// Gaussian mixture maximum likelihood by EM
    EmBaseline(EmArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// CSV file with the observations
    #[arg(long)]
    input: PathBuf,
    /// Column name or 1-based position
    #[arg(long, default_value = "1")]
    column: Column,
    /// Treat the first non-comment row as a header
    #[arg(long)]
    header: bool,
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// Margin d: λ ranges over [0, 1/2 − d]
    #[arg(long, default_value_t = 0.05)]
    d: f64,
    /// Number of optimiser starts
    #[arg(long, default_value_t = 8)]
    starts: usize,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Kernel bandwidth (default n^(−1/4))
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Also compute jackknife standard errors
    #[arg(long)]
    jackknife: bool,
    /// JSON output path (default stdout)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitLambdaArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, allow_hyphen_values = true)]
    mu1: f64,
    #[arg(long, allow_hyphen_values = true)]
    mu2: f64,
    #[arg(long)]
    jackknife: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scenario JSON; its parameters, n and seed are used
    #[arg(long, conflicts_with_all = ["lambda", "mu1", "mu2", "trimodal"])]
    scenario: Option<PathBuf>,
    /// Draw from the six-component trimodal mixture instead
    #[arg(long)]
    trimodal: bool,
    #[arg(long, default_value_t = 0.25)]
    lambda: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    mu1: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    mu2: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Overrides the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path (default stdout)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MonteCarloArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[command(flatten)]
    search: SearchArgs,
    /// Overrides the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Each location box extends this far beyond the true location
    #[arg(long, default_value_t = 3.0)]
    reach: f64,
    #[arg(long, default_value_t = 0.5)]
    min_separation: f64,
    /// TSV output path (default stdout)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurvesArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Use these parameters instead of fitting
    #[arg(long, requires_all = ["mu1", "mu2"])]
    lambda: Option<f64>,
    #[arg(long, requires_all = ["lambda", "mu2"], allow_hyphen_values = true)]
    mu1: Option<f64>,
    #[arg(long, requires_all = ["lambda", "mu1"], allow_hyphen_values = true)]
    mu2: Option<f64>,
    #[arg(long, default_value_t = 512)]
    grid_points: usize,
    /// Output directory
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct EmArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 0.05)]
    d: f64,
    /// Common component standard deviation
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Estimate the common standard deviation, starting from --sigma
    #[arg(long)]
    estimate_sigma: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::FitLambda(a) => commands::fit_lambda(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Montecarlo(a) => commands::montecarlo(a),
        Command::Curves(a) => commands::curves(a),
        Command::EmBaseline(a) => commands::em_baseline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
