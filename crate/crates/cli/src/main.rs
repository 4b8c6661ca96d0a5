//! `scengen`: generate and validate long-term hourly wind/solar scenarios.
//!
//! Pipeline: `synth` (or your own data) → `train` → `generate` →
//! `validate`, plus `compare` for the side-by-side variant analysis and
//! `prep` for inspecting the weekly aggregation. Every command writes a
//! resolved-config snapshot next to its outputs; re-running with that
//! snapshot reproduces the artifacts byte for byte.

mod commands;
mod settings;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "scengen",
    version,
    about = "Hourly wind/solar scenario generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic hourly dataset
    Synth(commands::synth::SynthArgs),
    /// Aggregate an hourly CSV to weekly observations and inspect profiles
    Prep(commands::prep::PrepArgs),
    /// Train a scenario model (with gamma grid search for rbf variants)
    Train(commands::train::TrainArgs),
    /// Sample hourly scenarios from a trained model
    Generate(commands::generate::GenerateArgs),
    /// Compare generated scenarios against historical data
    Validate(commands::validate::ValidateArgs),
    /// Train-free side-by-side validation of two model artifacts
    Compare(commands::compare::CompareArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            // First line of clap's message is the machine-parsable error.
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    let result = match cli.command {
        Command::Synth(args) => commands::synth::run(args),
        Command::Prep(args) => commands::prep::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Generate(args) => commands::generate::run(args),
        Command::Validate(args) => commands::validate::run(args),
        Command::Compare(args) => commands::compare::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
