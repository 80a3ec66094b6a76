//! `tvdeblur`: simulate, deblur, sweep and oracle-check from the command line.

mod commands;
mod imageio;
mod psfspec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tvdeblur_core::DeblurError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<DeblurError> for CliError {
    fn from(e: DeblurError) -> Self {
        match e {
            _ if e.is_numerical() => CliError::Numerical(e.to_string()),
            DeblurError::Params(_) | DeblurError::Symmetry(_) | DeblurError::Unsupported(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "tvdeblur", version, about = "Total-variation deblurring with boundary-aware fast solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Blur and add noise to a true image, keeping the field of view.
    Simulate(SimulateArgs),
    /// Restore an observed image.
    Deblur(DeblurArgs),
    /// Simulate once, then score a grid of alphas for several modes.
    Sweep(SweepArgs),
    /// Compare the fast operators with dense matrices on an n x n grid.
    OracleCheck(OracleArgs),
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct PsfSource {
    /// delta | gaussian:hsize=H,delta=D | motion:length=L,angle=A
    #[arg(long)]
    pub psf: Option<String>,
    /// Whitespace-separated PSF matrix, optional `# center r c` line.
    #[arg(long)]
    pub psf_file: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct TruthSource {
    /// True image (.pgm, .raw or .f64).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Built-in test image as name:ROWSxCOLS (cartoon, ramp-disk).
    #[arg(long)]
    pub builtin: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Comma-separated beta ladder (default 2,4,...,128).
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    /// Relative-change stopping tolerance for each beta.
    #[arg(long, default_value_t = 1e-3)]
    pub inner_tol: f64,
    /// Iteration cap for each beta.
    #[arg(long, default_value_t = 10)]
    pub inner_max: usize,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub truth: TruthSource,
    #[command(flatten)]
    pub psf: PsfSource,
    #[arg(long, default_value_t = 0.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Observed image; metadata goes next to it as <stem>.meta.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DeblurArgs {
    /// Observed image.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub psf: PsfSource,
    /// periodic | reflective | antireflective | zero | enlarge:<ext>[:<pad>]
    #[arg(long)]
    pub mode: String,
    /// Padding for enlarge modes given without one.
    #[arg(long)]
    pub pad: Option<usize>,
    #[arg(long)]
    pub alpha: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Restored image; the trace goes to <out>.trace.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub truth: TruthSource,
    #[command(flatten)]
    pub psf: PsfSource,
    #[arg(long)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated modes.
    #[arg(long, value_delimiter = ',', default_value = "periodic,reflective,antireflective")]
    pub modes: Vec<String>,
    /// Comma-separated alphas (default: 12 log-spaced values over 1e1..1e7).
    #[arg(long, value_delimiter = ',', conflicts_with = "alpha_grid")]
    pub alphas: Option<Vec<f64>>,
    /// Log-spaced grid as LO:HI:N.
    #[arg(long)]
    pub alpha_grid: Option<String>,
    /// Add the row alpha = 0.05 / sigma2.
    #[arg(long)]
    pub reference_alpha: bool,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Write 0 in the seconds column so reruns are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Directory for sweep.csv, observed.pgm and best_<mode>.pgm.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    /// PSF spec (default gaussian:hsize=3,delta=1).
    #[arg(long, default_value = "gaussian:hsize=3,delta=1")]
    pub psf: String,
    /// beta / alpha used for the system matrix.
    #[arg(long, default_value_t = 0.5)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let benign = matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion);
            return ExitCode::from(if benign { 0 } else { 1 });
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Deblur(a) => commands::deblur(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::OracleCheck(a) => commands::oracle_check(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tvdeblur: {e}");
            ExitCode::from(e.code())
        }
    }
}
