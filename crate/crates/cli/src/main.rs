//! `consep`: solve, price, verify, check and sweep constrained embedding
//! instances from a JSON config.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 infeasible instance,
//! 3 numerical failure (solver, residual or verification check).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use consep_core::FeasibilityVerdict;

#[derive(Parser, Debug)]
#[command(name = "consep", version, about = "Constrained Skorokhod embedding: insider barriers, hedges and prices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON run configuration; omitted fields take the default instance.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulation seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Information time, barrier and forward residuals.
    Solve(Common),
    /// Barrier plus hedge, static leg and price.
    Price(Common),
    /// Monte Carlo verification of embedding, duality and sub-hedge.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Also dump every simulated path.
        #[arg(long)]
        samples: bool,
    },
    /// Feasibility verdicts for the configured information.
    Noarb(Common),
    /// Solve and price over a range of kill rates plus the baseline.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Kill rates as `a:b:step`.
        #[arg(long, default_value = "0.5:2:0.5")]
        rho: String,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("infeasible instance: {}", .0.describe())]
    Infeasible(Box<FeasibilityVerdict>),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl From<consep_core::Error> for CliError {
    fn from(e: consep_core::Error) -> Self {
        use consep_core::Error as E;
        match e {
            E::Infeasible { verdict } => CliError::Infeasible(verdict),
            E::InvalidGrid(_)
            | E::InvalidMeasure(_)
            | E::InvalidStopping(_)
            | E::InvalidPayoff(_)
            | E::InvalidParameter(_)
            | E::Parse { .. }
            | E::Io { .. } => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Solve(c) => commands::solve(c),
        Command::Price(c) => commands::price(c),
        Command::Verify { common, samples } => commands::verify(common, *samples),
        Command::Noarb(c) => commands::noarb(c),
        Command::Sweep { common, rho } => commands::sweep(common, rho),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
