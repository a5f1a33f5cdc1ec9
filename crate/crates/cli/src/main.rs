//! `rarehmm`: model inspection, sampling, entropy estimation, block
//! reconstruction and parameter sweeps from a JSON model file.
//!
//! Exit codes: 0 success, 2 configuration or validation error, 3 runtime
//! budget exceeded.

mod commands;
mod config;
mod error;

use clap::{Parser, Subcommand, ValueEnum};
use commands::Run;
use config::{FlagOverrides, RunConfig};
use error::CliError;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Units {
    Nats,
    Bits,
}

impl Units {
    pub fn name(self) -> &'static str {
        match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        }
    }

    pub fn convert(self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats / std::f64::consts::LN_2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rarehmm",
    version,
    about = "Hidden Markov chains with rare transitions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON model and run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value = "nats")]
    units: Units,
    /// Worker threads; defaults to the number of available processors.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Transition scale p; replaces both "p" and "p_list".
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Path length (bracket depth for `bracket`).
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Block length L.
    #[arg(long = "block-l", global = true)]
    block_l: Option<usize>,
    /// Boundary margin K.
    #[arg(long = "block-k", global = true)]
    block_k: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Stationary law, entropies and channel checks.
    ModelInfo,
    /// Sample one stationary path and dump it.
    Sample,
    /// Monte Carlo estimates of h(Y), h(X|Y) and h(X,Y).
    Entropy,
    /// Exact lower/upper brackets on h(Y) by enumeration.
    Bracket,
    /// Block smoothing and causal filtering of a sampled path.
    Reconstruct,
    /// Per-p estimates, bounds and decoding statistics over a p list.
    Sweep,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::ModelInfo => "model-info",
            Command::Sample => "sample",
            Command::Entropy => "entropy",
            Command::Bracket => "bracket",
            Command::Reconstruct => "reconstruct",
            Command::Sweep => "sweep",
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut config = RunConfig::load(path)?;
    config.apply(&FlagOverrides {
        seed: cli.seed,
        p: cli.p,
        n: cli.n,
        reps: cli.reps,
        block_l: cli.block_l,
        block_k: cli.block_k,
    });
    let valid = config.validate()?;
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Invalid("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Invalid(format!("worker pool: {e}")))?;
    }
    if cli.command.name() != "model-info" {
        commands::ensure_dir(&cli.out)?;
    }
    let run = Run {
        command: cli.command.name(),
        config: &config,
        valid,
        out: cli.out.clone(),
        units: cli.units,
        started,
    };
    match cli.command {
        Command::ModelInfo => commands::model_info(&run),
        Command::Sample => commands::sample(&run),
        Command::Entropy => commands::entropy(&run),
        Command::Bracket => commands::bracket(&run),
        Command::Reconstruct => commands::reconstruct(&run),
        Command::Sweep => commands::sweep(&run),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
