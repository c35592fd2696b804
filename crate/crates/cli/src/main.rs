//! `locc`: evaluate, optimize, simulate and extrapolate local-measurement
//! strategies for qubit state estimation.
//!
//! Exit codes: 0 success, 2 invalid input, 3 resource limit exceeded,
//! 1 anything else (I/O).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use locc_core::Error;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Resource(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Resource(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Resource(m) | CliError::Io(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Resource { .. } => CliError::Resource(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "locc",
    version,
    about = "Local-measurement qubit state estimation"
)]
struct Cli {
    /// JSON file with default values for the subcommand's flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact average fidelity of a strategy.
    Evaluate(commands::EvaluateArgs),
    /// Optimize an adaptive measurement tree.
    Optimize(commands::OptimizeArgs),
    /// Monte Carlo estimate of the average fidelity.
    Simulate(commands::SimulateArgs),
    /// Large-N coefficient of a fixed-axis or two-stage scheme.
    Asymptotics(commands::AsymptoticsArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = config::load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Evaluate(a) => commands::evaluate(file, a),
        Command::Optimize(a) => commands::optimize(file, a),
        Command::Simulate(a) => commands::simulate(file, a),
        Command::Asymptotics(a) => commands::asymptotics(file, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
