use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

use output::Failure;

#[derive(Parser, Debug)]
#[command(name = "ttess", version, about = "Approximate, simulate, fit and test Gibbsian T-tessellations")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
pub struct Global {
    /// Master seed of every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// TOML or JSON file with per-command sections; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for independent chains (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// No progress messages on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Approximate a GeoJSON landscape by a T-tessellation.
    Approximate(commands::ApproximateArgs),
    /// Sample tessellations from a Gibbs model.
    Simulate(commands::SimulateArgs),
    /// Monte Carlo maximum likelihood fit to an observed tessellation.
    Fit(commands::FitArgs),
    /// Global envelope test on the empty-space function.
    Gof(commands::GofArgs),
    /// Summary statistics of a tessellation.
    Stats(commands::StatsArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
