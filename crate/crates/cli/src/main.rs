//! `gap-gauge`: analyse proxy-measured parity gaps from the command line.
//!
//! Exit codes: 0 success, 2 invalid input or usage, 3 undefined quantity
//! (an empty conditioning event), 4 sampler rejection budget exhausted.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gap_gauge_core::simulation::{SweepParameter, DEFAULT_BINS, DEFAULT_TRIALS};

#[derive(Debug, Parser)]
#[command(
    name = "gap-gauge",
    version,
    about = "Error analysis for parity gaps measured through a noisy proxy covariate"
)]
pub struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true, env = "GAPGAUGE_SEED", default_value_t = 42)]
    pub seed: u64,

    /// Worker threads (default: available parallelism). Never changes results.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Output path (simulate: file prefix).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Varied {
    #[value(name = "eps_b1")]
    EpsB1,
    #[value(name = "eps_b2")]
    EpsB2,
}

impl From<Varied> for SweepParameter {
    fn from(v: Varied) -> Self {
        match v {
            Varied::EpsB1 => SweepParameter::EpsB1,
            Varied::EpsB2 => SweepParameter::EpsB2,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gaps, structure parameters and bounds for one model file.
    Analyze {
        model: PathBuf,
        /// Tolerance for the independence diagnostics on full joints.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Monte Carlo distribution of the estimation error.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: u64,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
        /// Also check each trial against its own tight bounds.
        #[arg(long)]
        tight_check: bool,
    },
    /// Sweep one eps parameter over a grid.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        vary: Varied,
        /// Grid as start:stop:step.
        #[arg(long)]
        grid: String,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: u64,
    },
    /// Plug-in estimates from a records CSV.
    Estimate {
        data: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        smoothing: f64,
        /// Bootstrap replicates (0 disables).
        #[arg(long, default_value_t = 0)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Restrict to rows with ystar=1 first.
        #[arg(long)]
        condition_ystar: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("gap-gauge: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
