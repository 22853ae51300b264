use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kingman_cli::commands::{
    cmd_analyze, cmd_conjecture, cmd_genfun, cmd_simulate, cmd_sweep, cmd_verify, CmdError,
};
use kingman_cli::config::load_config;

/// Periodic mutation-selection model runner: simulation, condensation
/// analysis, and cross-validation reports from a JSON config.
#[derive(Parser)]
#[command(name = "kingman", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form condensation analysis (writes analyze.json)
    Analyze(RunArgs),
    /// Simulate the recursion (writes trajectory.csv)
    Simulate(RunArgs),
    /// Compare simulation to the closed-form limits (writes verify.csv)
    Verify(RunArgs),
    /// Spectral criteria over a z-grid (writes sweep.csv)
    Sweep(RunArgs),
    /// Weight generating functions, series vs closed form (writes genfun.csv)
    Genfun(RunArgs),
    /// Periodic-selection experiment (writes conjecture.json)
    Conjecture(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the JSON config file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing)
    #[arg(long)]
    out: PathBuf,
    /// Override the config horizon
    #[arg(long)]
    horizon: Option<usize>,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
}

fn run(
    args: &RunArgs,
    f: impl Fn(&kingman_cli::LoadedConfig, &std::path::Path) -> Result<(), CmdError>,
) -> Result<(), CmdError> {
    let mut loaded = load_config(&args.config)?;
    if let Some(h) = args.horizon {
        loaded.config.horizon = h;
    }
    if let Some(s) = args.seed {
        loaded.config.seed = s;
    }
    std::fs::create_dir_all(&args.out)?;
    f(&loaded, &args.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(args) => run(args, cmd_analyze),
        Command::Simulate(args) => run(args, cmd_simulate),
        Command::Verify(args) => run(args, cmd_verify),
        Command::Sweep(args) => run(args, cmd_sweep),
        Command::Genfun(args) => run(args, cmd_genfun),
        Command::Conjecture(args) => run(args, cmd_conjecture),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
