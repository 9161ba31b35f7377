//! `tidal`: tide preparation, lagoon simulation, head-schedule baselines,
//! PPO training, evaluation and comparison. File formats are described in
//! FORMATS.md and in `tidal <command> --help`.

mod common;
mod compare;
mod learn;
mod optimize;
mod simulate;
mod tide;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "tidal", version, about = "Tidal lagoon operation: simulation, baselines and PPO control")]
#[command(after_help = "Exit codes: 0 success, 1 runtime failure (e.g. training divergence), \
2 usage or input error, 3 incompatible artifact (checkpoint version).\n\
Every output embeds config_hash, seed and tool_version. With --threads 1, re-running \
a command with the same inputs reproduces its outputs byte for byte, except wall_time_s.")]
struct Cli {
    /// Worker threads for grid search and environment stepping [default: available cores]
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Random seed; overrides the seed key of the config file
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log verbosity (repeat for more)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize or ingest an ocean level series
    #[command(subcommand)]
    Tide(tide::TideCommand),
    Simulate(simulate::SimulateArgs),
    Optimize(optimize::OptimizeArgs),
    Train(learn::TrainArgs),
    Evaluate(learn::EvaluateArgs),
    Compare(compare::CompareArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(common::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Tide(cmd) => tide::run(cmd, cli.seed),
        Command::Simulate(args) => simulate::run(args),
        Command::Optimize(args) => optimize::run(args, cli.seed),
        Command::Train(args) => learn::train(args, cli.seed),
        Command::Evaluate(args) => learn::evaluate(args, cli.seed),
        Command::Compare(args) => compare::run(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(common::exit_code(&e))
        }
    }
}
