//! Command-line front end for boundary-value spectral experiments.
//!
//! Four subcommands drive the library against a single JSON config:
//! `identities` checks the algebraic trace identities, `spectrum` computes
//! eigenvalues by determinant roots and collocation, `trace` runs the full
//! regularized-trace experiment, and `equiconv` tabulates the resolvent
//! difference contour integrals. Exit codes: 0 all checks passed, 1 a
//! numeric check failed, 2 invalid input or a degenerate problem.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod report;

use config::ExperimentConfig;
use report::config_hash;

#[derive(Debug)]
pub enum CliError {
    /// Malformed config, impossible problem data, degenerate conditions.
    Input(String),
    /// A numeric procedure failed to produce a trustworthy result.
    Numeric(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Numeric(m) => write!(f, "{m}"),
        }
    }
}

impl From<bvspec::Error> for CliError {
    fn from(e: bvspec::Error) -> Self {
        use bvspec::Error::*;
        match e {
            VoidCondition { .. } | DegreeTooLarge { .. } | OrderTooSmall(_)
            | InvalidSegment { .. } | RankDeficient { .. } | NotRegular { .. }
            | GridTooSmall { .. } | Invalid(_) | EmptySamples(_) | NonFinite { .. } => {
                CliError::Input(e.to_string())
            }
            NearEigenvalue { .. } | SectorBoundary | LocalizationFailure { .. }
            | RootSearchExhausted { .. } | QuadratureNotConverged { .. }
            | LimitNotResolved { .. } | EigenvalueOnContour { .. } | Linalg(_) => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

#[derive(Parser)]
#[command(
    name = "bvspec",
    about = "Spectral experiments for two-point boundary value operators",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the closed-form trace identities of the configured system.
    Identities(CommonArgs),
    /// Compute eigenvalues by determinant roots and by collocation.
    Spectrum(CommonArgs),
    /// Run the regularized-trace experiment against the closed form.
    Trace(CommonArgs),
    /// Tabulate resolvent-difference contour integrals across radii.
    Equiconv(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for report.json and CSV tables.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Recorded in the report; reserved for randomized extensions.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the configured eigenvalue count.
    #[arg(long)]
    nmax: Option<usize>,
    /// Override the configured collocation grid size.
    #[arg(long)]
    grid: Option<usize>,
    /// Override the configured radii count.
    #[arg(long)]
    radii: Option<usize>,
}

fn run(cmd: &Command) -> Result<bool, CliError> {
    let (name, args): (&str, &CommonArgs) = match cmd {
        Command::Identities(a) => ("identities", a),
        Command::Spectrum(a) => ("spectrum", a),
        Command::Trace(a) => ("trace", a),
        Command::Equiconv(a) => ("equiconv", a),
    };
    let (mut cfg, raw) = ExperimentConfig::load(&args.config)?;
    if let Some(n_max) = args.nmax {
        cfg.numerics.n_max = n_max;
    }
    if let Some(grid) = args.grid {
        cfg.numerics.grid = grid;
    }
    if let Some(radii) = args.radii {
        cfg.numerics.radii_count = radii;
    }
    let hash = config_hash(&raw);
    match name {
        "identities" => commands::run_identities(&cfg, hash, args.seed, &args.out),
        "spectrum" => commands::run_spectrum(&cfg, hash, args.seed, &args.out),
        "trace" => commands::run_trace(&cfg, hash, args.seed, &args.out),
        _ => commands::run_equiconv(&cfg, hash, args.seed, &args.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more numeric checks failed; see report.json");
            ExitCode::from(1)
        }
        Err(CliError::Numeric(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
