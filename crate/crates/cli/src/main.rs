//! `hetcap`: capacities, encodings, Wehrl entropies, oracle runs and the
//! verification battery from the command line.
//!
//! Exit status: 0 when every check passes, 1 when a check fails or a
//! computation breaks down, 2 on invalid input.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hetcap::verify::{Profile, PROFILE_ENV};
use serde::Serialize;

mod commands;
mod output;

/// Version of the JSON/JSONL/CSV record layout.
pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Parser, Serialize)]
#[command(name = "hetcap", version, about = "Heterodyne channel capacities and their numerical certificates")]
pub struct Cli {
    #[command(subcommand)]
    #[serde(flatten)]
    pub command: Command,

    /// Output format. Defaults: csv for sweep, jsonl for verify, json otherwise.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Grid profile for Husimi-based computations.
    #[arg(long, global = true, env = PROFILE_ENV, default_value = "fast")]
    pub profile: Profile,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct NoiseArgs {
    /// Position noise β_q.
    #[arg(long)]
    pub bq: f64,
    /// Momentum noise β_p.
    #[arg(long)]
    pub bp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Coherent,
    Fock,
    Random,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Gaussian capacity at energy E, in nats and bits.
    Capacity {
        #[command(flatten)]
        #[serde(flatten)]
        noise: NoiseArgs,
        #[arg(long = "E")]
        #[serde(rename = "E")]
        energy: f64,
    },
    /// Optimal encoding parameters and their regime.
    Encoding {
        #[command(flatten)]
        #[serde(flatten)]
        noise: NoiseArgs,
        #[arg(long = "E")]
        #[serde(rename = "E")]
        energy: f64,
    },
    /// Wehrl entropy of one state against the minimal-entropy bound.
    Entropy {
        #[command(flatten)]
        #[serde(flatten)]
        noise: NoiseArgs,
        #[arg(long, value_enum, default_value = "coherent")]
        state: StateKind,
        /// Squeeze; defaults to the noise-matched value.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        y: f64,
        /// Fock index for `--state fock`.
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Number of Fock modes mixed by `--state random`.
        #[arg(long, default_value_t = 4)]
        dim: usize,
    },
    /// The check battery, or a single family.
    Verify {
        /// Keep only this family; with --delta, run one check of it instead.
        #[arg(long)]
        family: Option<String>,
        /// Squeeze of a single check (families vacuum_relative_entropy, entropy_inequality, log_sobolev).
        #[arg(long)]
        delta: Option<f64>,
        /// Noise of a single check.
        #[arg(long, default_value_t = 0.5)]
        bq: f64,
        #[arg(long, default_value_t = 0.5)]
        bp: f64,
    },
    /// Blahut–Arimoto on the quantile lattice of the optimal encoding.
    Ba {
        #[command(flatten)]
        #[serde(flatten)]
        noise: NoiseArgs,
        #[arg(long = "E")]
        #[serde(rename = "E")]
        energy: f64,
        /// Letters per lattice axis.
        #[arg(long, default_value_t = 15)]
        lattice: usize,
    },
    /// Monte Carlo rate of the lattice encoding against quadrature.
    Mc {
        #[command(flatten)]
        #[serde(flatten)]
        noise: NoiseArgs,
        #[arg(long = "E")]
        #[serde(rename = "E")]
        energy: f64,
        #[arg(long, default_value_t = 15)]
        lattice: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Capacity against energy, closed form and lattice BA.
    Sweep {
        #[command(flatten)]
        #[serde(flatten)]
        noise: NoiseArgs,
        #[arg(long, default_value_t = 0.5)]
        e_min: f64,
        #[arg(long, default_value_t = 8.0)]
        e_max: f64,
        #[arg(long, default_value_t = 0.25)]
        e_step: f64,
        #[arg(long, default_value_t = 7)]
        lattice: usize,
        /// Closed form only.
        #[arg(long)]
        no_ba: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli).and_then(|report| output::emit(&cli, &report).map(|()| report.pass)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("hetcap: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
