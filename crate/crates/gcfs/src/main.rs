use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gcfs::commands;
use gcfs::{CliError, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(name = "gcfs", version, about = "Mean-field analysis and simulation of greedy channel-first scheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the threshold equation and the stationary queue law.
    Analyze(Common),
    /// Simulate every seed and pool the results.
    Simulate(Common),
    /// Analyze and simulate, then report the differences.
    Compare(Common),
    /// One comparison per sweep point, collected in sweep.csv.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, env = "GCFS_OUT_DIR")]
    out: Option<PathBuf>,
    /// Worker threads for seeds and sweep points.
    #[arg(long, env = "GCFS_WORKERS")]
    workers: Option<usize>,
    /// Run this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let (common, cmd): (&Common, fn(&ExperimentConfig, &RunOptions) -> _) = match &cli.command {
        Command::Analyze(c) => (c, commands::analyze),
        Command::Simulate(c) => (c, commands::simulate_cmd),
        Command::Compare(c) => (c, commands::compare),
        Command::Sweep(c) => (c, commands::sweep),
    };
    let cfg = ExperimentConfig::load(&common.config)?;
    let opts = RunOptions::resolve(&cfg, common.out.clone(), common.workers, common.seed)?;
    cmd(&cfg, &opts)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
