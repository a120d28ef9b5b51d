//! `kancl`: continual-learning experiments with KAN and baseline networks.
//!
//! Subcommands: `train` (one class-incremental run), `grid` (hyperparameter
//! sweep), `peaks` (1D Gaussian-peaks study), `params` (parameter
//! accounting), `check-data` (verify MNIST files), `verify` (re-parse and
//! check emitted outputs).
//!
//! Exit codes: 0 success, 1 configuration error, 2 environment or data
//! error, 3 runtime numeric failure.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use config::FileConfig;
use kancl::error::KanError;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "kancl", version, about = "KAN continual-learning experiment runner")]
struct Cli {
    /// TOML run configuration; flags below override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory with the MNIST IDX files (raw or .gz).
    /// Falls back to config, then $KANCL_DATA_DIR, then `data/mnist`.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,

    /// Output directory for metrics, plots, and summaries.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for grid execution.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One class-incremental training run.
    Train,
    /// Run every cell of the configured hyperparameter grid.
    Grid,
    /// Sequential 1D Gaussian-peaks study (four trainability ablations).
    Peaks,
    /// Print the per-layer trainable-parameter breakdown as JSON.
    Params,
    /// Check that the expected MNIST files are present and well-formed.
    CheckData,
    /// Re-parse and schema-check everything in an output directory.
    Verify,
}

pub struct Ctx {
    pub cfg: FileConfig,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub jobs: usize,
}

/// Error carrying the process exit code.
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> CliError {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> CliError {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> CliError {
        CliError {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<KanError> for CliError {
    fn from(e: KanError) -> CliError {
        let code = match &e {
            KanError::InvalidConfig(_)
            | KanError::InvalidGrid(_)
            | KanError::CoefficientLength { .. }
            | KanError::LabelOutOfRange(_, _) => 1,
            KanError::Io { .. } | KanError::Dataset(_) | KanError::Checkpoint(_) => 2,
            _ => 3,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn main() {
    let cli = Cli::parse();

    let mut cfg = match &cli.config {
        Some(path) => match FileConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                std::process::exit(1);
            }
        },
        None => FileConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let data_dir = cli
        .data_dir
        .clone()
        .or_else(|| cfg.data_dir.clone())
        .or_else(|| std::env::var_os("KANCL_DATA_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data/mnist"));
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = Ctx {
        cfg,
        data_dir,
        out_dir,
        jobs: cli.jobs.max(1),
    };

    let result = match cli.command {
        Command::Train => commands::train(&ctx),
        Command::Grid => commands::grid(&ctx),
        Command::Peaks => commands::peaks(&ctx),
        Command::Params => commands::params(&ctx),
        Command::CheckData => commands::check_data(&ctx),
        Command::Verify => commands::verify(&ctx),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}
