use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qeosim::cli::{run, Command, RunOptions, SEED_ENV};

/// Digitally modulated microwave-to-optical conversion simulator.
#[derive(Debug, Parser)]
#[command(name = "qeosim", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// RNG seed; overrides QEOSIM_SEED and the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials (ser) or samples per symbol (encode).
    #[arg(long)]
    n: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let opts = RunOptions {
        seed: args.seed,
        env_seed: std::env::var(SEED_ENV).ok(),
        count: args.n,
    };
    match run(args.command, &args.config, &args.out, &opts) {
        Ok(summary) => {
            for name in &summary.failed_checks {
                eprintln!("check failed: {name}");
            }
            ExitCode::from(summary.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
