//! `nehari` — batch front end for the lattice ground-state solver.
//!
//! Subcommands: `spectrum`, `gap-check`, `assumptions`, `solve`, `sweep`;
//! each takes `--config <path>` plus optional `--seed`, `--out`, and
//! `--emit-plot-data`. Exit codes: 0 success, 1 usage or configuration
//! error, 2 hypothesis violation, 3 nonconvergence.

mod commands;
mod config;
mod emit;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or an invalid configuration file (exit 1).
    Config(String),
    /// File-system failures (exit 1).
    Io(String),
    /// A verified-hypothesis check failed, e.g. no spectral gap (exit 2).
    Hypothesis(String),
    /// The search ran but produced no verified solution (exit 3).
    NonConvergence(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) | CliError::Io(msg) => write!(f, "{msg}"),
            CliError::Hypothesis(msg) => write!(f, "hypothesis violation: {msg}"),
            CliError::NonConvergence(msg) => write!(f, "no convergence: {msg}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Hypothesis(_) => 2,
            CliError::NonConvergence(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "nehari",
    version,
    about = "Spectral analysis and ground-state search for lattice Schrödinger equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override the solver seed from the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Override the output directory from the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Additionally write gnuplot-ready plain-column files.
    #[arg(long)]
    emit_plot_data: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Eigenvalues as CSV plus a JSON band summary.
    Spectrum(CommonArgs),
    /// Check that zero sits inside a spectral gap.
    GapCheck(CommonArgs),
    /// Audit the nonlinearity hypotheses; failures are report content.
    Assumptions(CommonArgs),
    /// Multistart search for verified solutions.
    Solve(CommonArgs),
    /// Re-solve across torus sides and tabulate the trend.
    Sweep(CommonArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (args, run_fn): (&CommonArgs, fn(&RunConfig, &CommonArgs) -> Result<(), CliError>) =
        match &cli.command {
            Cmd::Spectrum(a) => (a, |c, a| {
                commands::cmd_spectrum(c, a.out.as_deref(), a.emit_plot_data)
            }),
            Cmd::GapCheck(a) => (a, |c, a| {
                commands::cmd_gap_check(c, a.out.as_deref(), a.emit_plot_data)
            }),
            Cmd::Assumptions(a) => (a, |c, a| {
                commands::cmd_assumptions(c, a.out.as_deref(), a.emit_plot_data)
            }),
            Cmd::Solve(a) => (a, |c, a| {
                commands::cmd_solve(c, a.seed, a.out.as_deref(), a.emit_plot_data)
            }),
            Cmd::Sweep(a) => (a, |c, a| {
                commands::cmd_sweep(c, a.seed, a.out.as_deref(), a.emit_plot_data)
            }),
        };
    let config = RunConfig::load(&args.config)?;
    run_fn(&config, args)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            eprint!("{err}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
