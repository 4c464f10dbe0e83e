use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use output::OUT_ENV;

/// Semi-implicit solvers and fast convolution for time-fractional equations.
#[derive(Debug, Parser)]
#[command(name = "fracstep", version)]
struct Cli {
    /// Output directory for CSV files and manifests.
    #[arg(long, global = true, env = OUT_ENV, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convolution and starting weights.
    Weights(commands::weights::WeightsArgs),
    /// Stability intervals or a stability-region raster.
    Stability(commands::stability::StabilityArgs),
    /// Solve a test problem at one step or over a step sweep.
    Solve(commands::solve::SolveArgs),
    /// Time direct and fast history sums for growing step counts.
    Bench(commands::bench::BenchArgs),
    /// Compare the fast history sum with the direct sum.
    FastconvCheck(commands::fastconv::FastconvArgs),
}

/// Shared `--check` flag.
#[derive(Debug, Clone, Copy, Args)]
pub struct CheckArg {
    /// Exit with status 3 when results miss their reference tolerances.
    #[arg(long)]
    pub check: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Weights(a) => commands::weights::run(&cli.out, a),
        Command::Stability(a) => commands::stability::run(&cli.out, a),
        Command::Solve(a) => commands::solve::run(&cli.out, a),
        Command::Bench(a) => commands::bench::run(&cli.out, a),
        Command::FastconvCheck(a) => commands::fastconv::run(&cli.out, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
