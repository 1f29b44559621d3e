//! `signet`: signed chemical–gene link prediction from the command line.
//!
//! Subcommands: `generate` (synthetic dataset), `train` (fit a model),
//! `eval` (score a checkpoint and emit the report), `ablate` (CL and
//! subgraph grids). Exit codes: 0 success, 2 configuration error, 3 data
//! error, 4 numeric-health abort.

mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CliError;

#[derive(Parser)]
#[command(name = "signet", version, about = "Signed chemical-gene link prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic planted-polarity dataset as nodes.tsv/edges.tsv.
    Generate(commands::generate::GenerateArgs),
    /// Train a model on a TSV dataset; produces a run directory.
    Train(commands::train::TrainArgs),
    /// Evaluate a trained run directory; produces report files.
    Eval(commands::eval::EvalArgs),
    /// Run the CL or subgraph ablation grid and emit a median-metric table.
    Ablate(commands::ablate::AblateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => commands::generate::run(args),
        Command::Train(args) => commands::train::run(args).map(|_| ()),
        Command::Eval(args) => commands::eval::run(args),
        Command::Ablate(args) => commands::ablate::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
