//! `tep`: batch driver for instance generation, pebbling search,
//! compilation, program checks and trace analyses.
//!
//! Exit status: 0 on pass, 1 when a check or analysis fails with a
//! witness, 2 on usage, input or budget errors.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Status;
use config::{GlobalArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "tep", version, about = "Tree evaluation pebbling and branching program lab")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded random instance.
    Gen(commands::GenArgs),
    /// Search the minimum pebble number of a game.
    Pebble(commands::PebbleArgs),
    /// Compile a pebbling sequence into a branching program.
    Compile(commands::CompileArgs),
    /// Check a program for correctness and restrictions.
    Check(commands::CheckArgs),
    /// Trace one instance through a pipeline, or census all of them.
    Analyze(commands::AnalyzeArgs),
    /// Count inputs per supercritical state.
    Census(commands::CensusArgs),
    /// Render a program or a pebbling configuration as DOT.
    Export(commands::ExportArgs),
}

fn run(cli: &Cli) -> anyhow::Result<Status> {
    let cfg = RunConfig::resolve(&cli.global)?;
    if let Some(jobs) = cfg.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match &cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Pebble(a) => commands::pebble(a, &cfg),
        Command::Compile(a) => commands::compile(a),
        Command::Check(a) => commands::check(a, &cfg),
        Command::Analyze(a) => commands::analyze(a, &cfg),
        Command::Census(a) => commands::census(a, &cfg),
        Command::Export(a) => commands::export(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Fail) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            // A pipeline that finds a counterexample is a failed analysis,
            // not a usage error.
            match err.downcast_ref::<tep_core::Error>() {
                Some(tep_core::Error::Counterexample(_)) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
