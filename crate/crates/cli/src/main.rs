mod config;
mod fitting;
mod io;
mod relaxing;
mod reporting;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::io::Failure;

/// Fit, verify and apply paraboloid approximations of univariate functions.
#[derive(Parser, Debug)]
#[command(name = "parabolic", version)]
struct Cli {
    /// JSON object of option defaults, keyed by long flag name; flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for parallel jobs.
    #[arg(long, global = true, default_value_t = 4)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search for a small certified paraboloid set.
    Fit(fitting::FitArgs),
    /// Re-certify a coefficient file or every entry of a table.
    Verify(fitting::VerifyArgs),
    /// Run a matrix of fit jobs and store the results in a table.
    Table(fitting::TableArgs),
    /// Write orig/para/both variants of instances and their gap report.
    Relax(relaxing::RelaxArgs),
    /// Count univariate nonlinear nodes by function.
    Census(relaxing::CensusArgs),
    /// Aggregate run times (shifted geometric mean) and gaps per variant.
    Report(reporting::ReportArgs),
    /// Write a random zigzag table or the canonical one.
    ZigzagGen(reporting::ZigzagArgs),
}

fn run() -> Result<(), Failure> {
    let argv = config::merged_args(std::env::args_os().collect())?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return Err(if e.use_stderr() {
                Failure::Reported(2)
            } else {
                Failure::Reported(0)
            });
        }
    };
    if cli.threads == 0 {
        return Err(Failure::Config("--threads must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Failure::Config(e.to_string()))?;
    match cli.command {
        Command::Fit(a) => fitting::fit(a),
        Command::Verify(a) => fitting::verify(a),
        Command::Table(a) => fitting::table(a),
        Command::Relax(a) => relaxing::relax(a),
        Command::Census(a) => relaxing::census(a),
        Command::Report(a) => reporting::report(a),
        Command::ZigzagGen(a) => reporting::zigzag(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if let Some(msg) = f.message() {
                eprintln!("parabolic: {msg}");
            }
            ExitCode::from(f.code())
        }
    }
}
