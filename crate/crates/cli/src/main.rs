//! `repro`: command-line front end for reprokit.
//!
//! Exit codes: 0 success or PASS, 1 verification or policy FAIL, 2 usage
//! error, 3 runtime error.

mod commands;
mod demo;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reprokit::provenance::Policy;

pub const EXIT_FAIL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

/// Environment variable overriding the default `./runs` directory.
pub const RUNS_DIR_ENV: &str = "REPRO_RUNS_DIR";

#[derive(Debug, Parser)]
#[command(name = "repro", version, about = "Reproducible machine-learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create or verify a dataset footprint
    Footprint {
        #[command(subcommand)]
        action: FootprintAction,
    },
    /// Split a class-folder dataset into train/val/test copies
    Split {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Train, val and test ratios, e.g. 0.6,0.2,0.2
        #[arg(long)]
        ratios: String,
        #[arg(long)]
        seed: u64,
    },
    /// Per-channel mean/std and class distribution of a class-folder dataset
    Stats {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a task with full provenance capture
    Run {
        #[command(subcommand)]
        task: RunTask,
    },
    /// Aggregate one metric across runs matching a directory glob
    Aggregate {
        /// Glob over run directories, e.g. 'runs/demo2d/*'
        pattern: String,
        #[arg(long)]
        metric: String,
        #[arg(long)]
        split: String,
        #[arg(long)]
        out_svg: Option<PathBuf>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
    },
    /// Render the stored confusion matrix of a run
    Confusion {
        run_dir: PathBuf,
        #[arg(long)]
        out_svg: PathBuf,
    },
    /// Project the rows of a numeric CSV onto their principal components
    Pca {
        csv: PathBuf,
        #[arg(short = 'k', value_parser = clap::value_parser!(u8).range(2..=3))]
        k: u8,
        #[arg(long)]
        out_csv: PathBuf,
    },
    /// Random hyper-parameter search over demo2d runs
    Sweep {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        metric: String,
        #[arg(long, value_parser = ["min", "max"])]
        mode: String,
    },
    /// Re-execute the command recorded in a run's manifest
    Rerun { run_dir: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum FootprintAction {
    /// Hash every file and write <dir>/footprint.json
    Create {
        dir: PathBuf,
        /// Overwrite an existing footprint
        #[arg(long)]
        force: bool,
    },
    /// Check <dir> against its footprint (quick by default)
    Verify {
        dir: PathBuf,
        /// Rehash every file instead of the metadata-only check
        #[arg(long)]
        deep: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum RunTask {
    /// Deterministic 2D blob classification
    Demo2d(Demo2dArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Demo2dArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub epochs: u64,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, value_enum, default_value = "snapshot")]
    pub policy: PolicyArg,
    #[arg(long, default_value = "demo2d")]
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PolicyArg {
    Strict,
    Snapshot,
    Off,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Strict => Policy::Strict,
            PolicyArg::Snapshot => Policy::Snapshot,
            PolicyArg::Off => Policy::Off,
        }
    }
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Fail,
}

fn main() -> ExitCode {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .format_target(false)
        .format_timestamp(None)
        .init();

    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match commands::execute(cli.command, args[1..].to_vec()) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(EXIT_FAIL),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
