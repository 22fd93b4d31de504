//! The `orthorecon` command line: one configuration file drives dataset
//! preparation, blueprint synthesis, training, reconstruction, evaluation and the
//! review service. Exit codes: 0 success, 1 internal error, 2 invalid input,
//! 3 the user has to review or fix the input (view labels, view sizes).

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{ProjectConfig, DEFAULT_CONFIG};
use crate::error::{CliError, Exit};

#[derive(Debug, Parser)]
#[command(name = "orthorecon", version, about = "Vehicle meshes from four-view orthographic blueprints")]
pub struct Cli {
    /// Project configuration (default: ./orthorecon.toml when present).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print the commented default configuration and exit.
    #[arg(long)]
    pub print_config: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw weighted signed-distance samples for training meshes.
    Prep(commands::PrepArgs),
    /// Render synthetic four-view blueprints of meshes.
    Synth(commands::SynthArgs),
    /// Train the field on blueprint/sample pairs.
    Train(commands::TrainArgs),
    /// Reconstruct a mesh from a blueprint sheet.
    Reconstruct(commands::ReconstructArgs),
    /// Compare a reconstruction with a ground-truth mesh.
    Eval(commands::EvalArgs),
    /// Run the HTTP review and reconstruction service.
    Serve(commands::ServeArgs),
}

/// Executes parsed arguments.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.print_config {
        print!("{DEFAULT_CONFIG}");
        return Ok(());
    }
    let Some(command) = &cli.command else {
        return Err(CliError::input("no command given; see --help"));
    };
    let project = ProjectConfig::discover(cli.config.as_deref())?;
    match command {
        Command::Prep(a) => commands::prep(a, &project),
        Command::Synth(a) => commands::synth(a, &project),
        Command::Train(a) => commands::train(a, &project),
        Command::Reconstruct(a) => commands::reconstruct(a, &project),
        Command::Eval(a) => commands::eval(a, &project),
        Command::Serve(a) => commands::serve(a, &project),
    }
}

/// Parses the process arguments, runs the command and maps the outcome to an exit code.
pub fn main_exit() -> Exit {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => Exit::Success,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit
        }
    }
}
