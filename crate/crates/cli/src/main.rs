//! `sdr` — train, evaluate, and inspect stochastic deep-Ritz solutions.
//!
//! Exit codes: 0 success, 1 numerical check failure, 2 usage error,
//! 3 I/O error.

mod commands;
mod common;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use common::CliError;

#[derive(Parser)]
#[command(name = "sdr", version, about = "Stochastic deep-Ritz solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network on a built-in problem from a JSON config.
    Train(commands::train::TrainArgs),
    /// Relative L2 mean error of a checkpoint against the exact solution.
    Eval(commands::eval::EvalArgs),
    /// Kernel density estimate of the solution marginal at a point.
    Density(commands::density::DensityArgs),
    /// Joint histogram of the solution at two points.
    Joint(commands::joint::JointArgs),
    /// First-order-optimality residuals along random admissible directions.
    Residual(commands::residual::ResidualArgs),
    /// Draw points from one of the geometric samplers as CSV.
    Sample(commands::sample::SampleArgs),
    /// Verify analytic gradients against finite differences.
    Gradcheck(commands::gradcheck::GradcheckArgs),
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help/--version are not errors.
            if err.use_stderr() {
                eprint!("{err}");
                return ExitCode::from(2);
            }
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Density(args) => commands::density::run(args),
        Command::Joint(args) => commands::joint::run(args),
        Command::Residual(args) => commands::residual::run(args),
        Command::Sample(args) => commands::sample::run(args),
        Command::Gradcheck(args) => commands::gradcheck::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

/// Honor the SDR_THREADS worker cap before any parallel work starts.
fn init_thread_pool() {
    if let Ok(value) = std::env::var("SDR_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
            }
        }
    }
}

#[allow(unused_imports)]
use common::*;
