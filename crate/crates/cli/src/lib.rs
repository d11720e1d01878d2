//! Command-line harness: chain runs, GQPE planning and verification, and
//! reports against exact references.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 for
//! runtime and guard failures.

mod commands;
mod config;
mod report;
mod sink;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use commands::{ClassicalArgs, DbVerifyArgs, GqpeVerifyArgs, PlanArgs, QuantumArgs};
pub use report::ReportArgs;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<qmetro::Error> for CliError {
    fn from(e: qmetro::Error) -> Self {
        use qmetro::Error as E;
        let inner = match &e {
            E::AtStep { source, .. } => source.as_ref(),
            other => other,
        };
        match inner {
            E::Truncated { .. }
            | E::Guard { .. }
            | E::SimulatorCap { .. }
            | E::ZeroProbability { .. }
            | E::Eigensolver(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "qmetro",
    version,
    about = "Rejection-free classical and quantum Metropolis samplers"
)]
pub struct Cli {
    /// JSON file whose keys override the command-line flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the rejection-free classical chain and stream JSONL records.
    ClassicalChain(ClassicalArgs),
    /// Run the measurement-based quantum chain and stream JSONL records.
    QuantumChain(QuantumArgs),
    /// Print the resource-minimizing GQPE configuration as JSON.
    Plan(PlanArgs),
    /// Emit a CSV sweep of the effective filter against the ideal Gaussian.
    GqpeVerify(GqpeVerifyArgs),
    /// Print trace, detailed-balance and stationarity residuals as JSON.
    DbVerify(DbVerifyArgs),
    /// Estimate means with autocorrelation-corrected errors from sample files.
    Report(ReportArgs),
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let file = cli.config.as_deref();
    match cli.command {
        Command::ClassicalChain(args) => commands::classical_chain(config::merge(args, file)?),
        Command::QuantumChain(args) => commands::quantum_chain(config::merge(args, file)?),
        Command::Plan(args) => commands::plan(config::merge(args, file)?),
        Command::GqpeVerify(args) => commands::gqpe_verify(args, file),
        Command::DbVerify(args) => commands::db_verify(config::merge(args, file)?),
        Command::Report(args) => report::report(config::merge(args, file)?),
    }
}
