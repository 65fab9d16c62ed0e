//! `stopspde`: batch front-end for simulations, convergence studies, moment
//! checks and the stopped-versus-untamed comparison.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stopspde_core::analysis::Axis;

use crate::config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "stopspde", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Master seed; replaces `analysis.seeds`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write one trajectory CSV per grid resolution and sample.
    Simulate,
    /// Coupled convergence study along one axis, or every configured axis.
    Converge {
        #[arg(long)]
        axis: Option<Axis>,
        /// Fit errors `h^r` instead of simulating, e.g. `h^0.5`.
        #[arg(long)]
        synthetic: Option<String>,
    },
    /// A priori moment bound, freeze fraction and smoothness witness.
    Moments,
    /// Stopped versus untamed scheme on shared paths.
    Compare,
}

/// Errors sorted by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Exit code 2.
    Config(String),
    /// Exit code 3.
    Internal(String),
}

impl Failure {
    pub fn config(msg: impl Into<String>) -> Self {
        Failure::Config(msg.into())
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            Failure::Config(m) => Failure::Config(format!("{what}: {m}")),
            Failure::Internal(m) => Failure::Internal(format!("{what}: {m}")),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Internal(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Internal(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<stopspde_core::Error> for Failure {
    fn from(e: stopspde_core::Error) -> Self {
        use stopspde_core::Error as E;
        match e {
            E::Config(m) | E::Format(m) => Failure::Config(m),
            other => Failure::Internal(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let path = cli
        .config
        .ok_or_else(|| Failure::config("--config PATH is required"))?;
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    if let Some(dir) = cli.output {
        cfg.output.dir = dir;
    }
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Failure::config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Internal(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Converge { axis, synthetic } => match synthetic {
            Some(expr) => commands::converge_synthetic(&cfg, axis, &expr),
            None => commands::converge(&cfg, axis),
        },
        Command::Moments => commands::moments(&cfg),
        Command::Compare => commands::compare(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("stopspde: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
