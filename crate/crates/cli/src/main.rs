//! `udts`: batch runner for the SF allocation experiments.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use udts_core::marl::Algorithm;

#[derive(Parser, Debug)]
#[command(name = "udts", version, about = "SF allocation for subterranean LoRaWAN direct-to-satellite links")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Master seed for deployment, initialisation and exploration streams.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// TOML configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "UDTS_OUT_DIR", default_value = "udts-out")]
    pub out_dir: PathBuf,
    /// Worker threads for the parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analytical vs Monte-Carlo success probability by distance.
    Validate(ValidateArgs),
    /// Apply a baseline allocation and score it.
    Allocate(AllocateArgs),
    /// Train a multi-agent allocator.
    Train(TrainArgs),
    /// Average EPP and SF shares over several network sizes.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long)]
    pub devices: Option<usize>,
    /// Spreading factors to sweep, each applied to every device.
    #[arg(long, value_delimiter = ',', default_values_t = [7u8, 8, 9, 10, 11, 12])]
    pub sf: Vec<u8>,
    /// Report periods per replication.
    #[arg(long, default_value_t = 25)]
    pub periods: usize,
    #[arg(long, default_value_t = 4)]
    pub replications: usize,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Points on the analytical curve.
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    #[arg(long, value_enum, default_value_t = Fade::Shared)]
    pub fade: Fade,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fade {
    Shared,
    Independent,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeName {
    SameSf,
    Eib,
    Eab,
    Plb,
}

#[derive(Args, Debug)]
pub struct AllocateArgs {
    #[arg(long, value_enum)]
    pub scheme: SchemeName,
    /// SF used by `same-sf`.
    #[arg(long, default_value_t = 9)]
    pub sf: u8,
    #[arg(long)]
    pub devices: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlgoName {
    Mad3qn,
    Maa2c,
}

impl From<AlgoName> for Algorithm {
    fn from(a: AlgoName) -> Self {
        match a {
            AlgoName::Mad3qn => Algorithm::Mad3qn,
            AlgoName::Maa2c => Algorithm::Maa2c,
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub algo: AlgoName,
    #[arg(long)]
    pub devices: Option<usize>,
    /// Overrides `marl.t_max`.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub episodes: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', required = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_devices: Vec<u64>,
    /// Learned allocators to include next to the baselines.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub algos: Vec<AlgoName>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub episodes: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(a) => commands::validate(&cli.common, &a),
        Command::Allocate(a) => commands::allocate(&cli.common, &a),
        Command::Train(a) => commands::train(&cli.common, &a),
        Command::Sweep(a) => commands::sweep(&cli.common, &a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for bad input, 3 for numeric breakdowns, 1 for anything else (I/O).
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(core) = cause.downcast_ref::<udts_core::Error>() {
            return match core {
                udts_core::Error::Numeric(_) => 3,
                udts_core::Error::Domain(_) | udts_core::Error::Config(_) => 2,
            };
        }
        if cause.downcast_ref::<commands::UsageError>().is_some() {
            return 2;
        }
    }
    1
}
