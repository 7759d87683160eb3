//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 validation failure.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::Error;

pub use config::RunConfig;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::PreconditionViolation(_) | Error::InvalidNoiseModel(_) => {
                Self::Validation(e.to_string())
            }
            Error::StepFailure { .. } | Error::MeasurementFailure(_) => Self::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EventKind {
    Reversal,
    Exit,
}

#[derive(Debug, Parser)]
#[command(name = "llg1d", version, about = "Stochastic Landau-Lifshitz-Gilbert lab on a 1D needle")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args, Clone, Default)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Record every N steps (overrides `solver.record_every`).
    #[arg(long)]
    pub record_every: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Deterministic or controlled (noise-free) run.
    RunDet {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Stochastic run of one or more paths.
    RunSde {
        #[command(flatten)]
        common: CommonArgs,
        /// Base seed (overrides `solver.seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Number of paths (overrides `solver.n_paths`).
        #[arg(long)]
        paths: Option<usize>,
        /// Drop the Ito correction from the Euler scheme (negative control).
        #[arg(long, hide = true)]
        zero_ito_correction: bool,
    },
    /// Build the reversal field schedule and its equivalent control.
    BuildPlan {
        #[command(flatten)]
        common: CommonArgs,
        /// Target radius around (1,0,0) (overrides `plan.delta`).
        #[arg(long)]
        delta: Option<f64>,
        /// Plan horizon (overrides `plan.horizon`, default `params.horizon`).
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Monte-Carlo event probability with analytic bounds.
    Estimate {
        #[command(flatten)]
        common: CommonArgs,
        /// Base seed (overrides `solver.seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Number of paths, at least 100 (overrides `solver.n_paths`).
        #[arg(long)]
        paths: Option<usize>,
        /// Event kind (overrides `estimate.event`; needs --radius).
        #[arg(long, requires = "radius")]
        event: Option<EventKind>,
        /// δ for reversal, ρ for exit.
        #[arg(long)]
        radius: Option<f64>,
        /// Noise level (overrides `params.eps`).
        #[arg(long)]
        eps: Option<f64>,
        /// Bound slack (overrides `estimate.xi`).
        #[arg(long)]
        xi: Option<f64>,
    },
    /// Self-check suite.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        level: Level,
        /// Drop the Ito correction in the weak-equivalence check (negative control).
        #[arg(long, hide = true)]
        zero_ito_correction: bool,
    },
}

/// Runs a parsed command line, returning the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::RunDet { common } => commands::run_det(&common),
        Command::RunSde {
            common,
            seed,
            paths,
            zero_ito_correction,
        } => commands::run_sde(&common, seed, paths, zero_ito_correction),
        Command::BuildPlan {
            common,
            delta,
            horizon,
        } => commands::build_plan(&common, delta, horizon),
        Command::Estimate {
            common,
            seed,
            paths,
            event,
            radius,
            eps,
            xi,
        } => commands::estimate(&common, seed, paths, event.zip(radius), eps, xi),
        Command::Verify {
            level,
            zero_ito_correction,
        } => commands::verify(level, zero_ito_correction),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("llg1d: {e}");
            e.exit_code()
        }
    }
}
