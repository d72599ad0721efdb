//! `saa`: simulate simultaneous ascending auctions, derive self-confirming
//! price distributions, and analyze empirical games.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::RunContext;

#[derive(Parser)]
#[command(name = "saa", version, about = "Simultaneous ascending auction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the environment's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for simulation batches (0 = automatic).
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory for data files and the run manifest.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Derive a self-confirming price distribution by iterated simulation.
    DeriveSc(RunArgs),
    /// Estimate payoffs for one strategy profile.
    SimulateProfile(RunArgs),
    /// Equilibrium analysis of an estimated payoff table.
    AnalyzeGame(RunArgs),
    /// Recompute the checksums recorded in a run manifest.
    Verify {
        /// Directory containing manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print per-good price statistics of a stored distribution.
    DescribeDist {
        /// Distribution file (.csv or .json).
        path: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::DeriveSc(args) => commands::cmd_derive_sc(&RunContext {
            config_path: &args.config,
            seed_override: args.seed,
            workers: args.workers,
            out_dir: &args.out,
        }),
        Command::SimulateProfile(args) => commands::cmd_simulate_profile(&RunContext {
            config_path: &args.config,
            seed_override: args.seed,
            workers: args.workers,
            out_dir: &args.out,
        }),
        Command::AnalyzeGame(args) => commands::cmd_analyze_game(&RunContext {
            config_path: &args.config,
            seed_override: args.seed,
            workers: args.workers,
            out_dir: &args.out,
        }),
        Command::Verify { out } => commands::cmd_verify(out),
        Command::DescribeDist { path } => commands::cmd_describe_dist(path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
