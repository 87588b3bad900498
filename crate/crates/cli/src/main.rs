use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nrcasimir_cli::config::{Format, Task};
use nrcasimir_cli::{run, Overrides};

/// Casimir free energies, forces and maps for non-reciprocal dipoles.
#[derive(Parser)]
#[command(name = "nrcasimir", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pair free energy and its decomposition.
    Energy(Common),
    /// Forces on both particles of a pair and the Laplacian.
    Force(Common),
    /// Free-energy map of the moving particle over a plane.
    Map(Common),
    /// Free energy on a circle around the fixed particle.
    ScanAngle(Common),
    /// Laplacian map of the moving particle over a plane.
    LaplacianMap(Common),
    /// Three-particle energy, correction, forces and torques.
    ThreeBody(Common),
    /// Compare the engine against the closed-form toy-model limits.
    ValidateAsymptotics(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; overrides `output.threads`.
    #[arg(long)]
    threads: Option<usize>,
    /// Output format; overrides `output.format`.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (task, args) = match Cli::parse().command {
        Command::Energy(a) => (Task::Energy, a),
        Command::Force(a) => (Task::Force, a),
        Command::Map(a) => (Task::Map, a),
        Command::ScanAngle(a) => (Task::ScanAngle, a),
        Command::LaplacianMap(a) => (Task::LaplacianMap, a),
        Command::ThreeBody(a) => (Task::ThreeBody, a),
        Command::ValidateAsymptotics(a) => (Task::ValidateAsymptotics, a),
    };
    let overrides = Overrides {
        out: args.out,
        threads: args.threads,
        format: args.format,
    };
    match run(task, &args.config, &overrides) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
