//! `svp`: synthetic scenes, pose solving and evaluation from the command line.
//!
//! Exit codes: 0 ok, 1 other failure, 2 IO, 3 format or corrupt input,
//! 4 inconsistent inputs (e.g. scene ids that do not match). Failures print a
//! single JSON line on stderr.

mod cmd;
mod error;
mod io;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "svp", version, about = "Sparse-view camera pose pipeline")]
struct Cli {
    /// Worker threads; 0 uses every core. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic scenes (and optionally energy tables).
    Synth(cmd::synth::SynthArgs),
    /// Recover camera rotations for every scene.
    Solve(cmd::solve::SolveArgs),
    /// Score predictions against ground truth.
    Eval(cmd::eval::EvalArgs),
    /// Build a rotation grid, optionally writing it to disk.
    Grid(cmd::grid::GridCmdArgs),
    /// Summarize per-scene CSVs into one row each.
    Report(cmd::report::ReportArgs),
}

fn run(cli: &Cli) -> CliResult<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    match &cli.command {
        Command::Synth(a) => cmd::synth::run(a),
        Command::Solve(a) => cmd::solve::run(a),
        Command::Eval(a) => cmd::eval::run(a),
        Command::Grid(a) => cmd::grid::run(a),
        Command::Report(a) => cmd::report::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.to_string().trim_end().to_string());
            let _ = e.print();
            eprintln!("{}", err.to_json_line());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
