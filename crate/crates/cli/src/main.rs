//! `ssbpr`: run single traced simulations, Monte Carlo campaigns, or solve
//! protocol parameters for a scenario file.

mod commands;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ssbpr::resync::Variant;
use ssbpr::sim::scenario::Strategy;

#[derive(Parser, Debug)]
#[command(name = "ssbpr", version, about = "Self-stabilizing Byzantine pulse resynchronization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one seed and write its trace and round report.
    Run(Common),
    /// Run many seeds and summarise convergence statistics.
    Montecarlo(Campaign),
    /// Solve protocol parameters and print the constraint checklist.
    Solve(Common),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Seed, or base seed of a campaign.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Byzantine strategy: crash, random, equivocate or keeper.
    #[arg(long, value_parser = parse_strategy)]
    pub adversary: Option<Strategy>,
    /// Let the adversary see coins before choosing its own.
    #[arg(long)]
    pub rushing: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Run even when the parameters violate feasibility constraints.
    #[arg(long)]
    pub allow_invalid: bool,
}

#[derive(Args, Debug, Clone)]
pub struct Campaign {
    #[command(flatten)]
    pub common: Common,
    /// Number of seeds, at least 2.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(2..))]
    pub trials: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariantArg {
    A,
    R,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::A => Variant::A,
            VariantArg::R => Variant::R,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Table,
    Json,
    Csv,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: ssbpr::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run(c) => commands::run(c),
        Command::Montecarlo(c) => commands::montecarlo(c),
        Command::Solve(c) => commands::solve(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
