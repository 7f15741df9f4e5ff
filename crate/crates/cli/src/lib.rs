//! Command-line front end for the hybrid-cell association models.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{Outcome, Target};
pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot parse config {}: {source}", path.display())]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Parser)]
#[command(name = "hybrid-assoc", version, about = "Association policies for a hybrid WLAN/UMTS cell")]
pub struct Cli {
    /// TOML run configuration; defaults are used when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Overrides `sim.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Per-mobile and aggregate throughput of both networks.
    ThroughputCurves,
    /// Optimal routing policy and value function.
    SolveSmdp,
    /// Threshold equilibrium of the individual-optimality game.
    Equilibrium,
    /// Equilibrium threshold over a grid of common-stream rates.
    Staircase,
    /// Monte Carlo check of a solver.
    Simulate {
        #[arg(long, value_enum, default_value = "smdp")]
        target: Target,
    },
}

/// Load the configuration named on the command line and apply overrides.
pub fn resolve_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.sim.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

pub fn execute(command: Command, config: &RunConfig, out: &std::path::Path) -> anyhow::Result<Outcome> {
    match command {
        Command::ThroughputCurves => commands::throughput_curves(config, out),
        Command::SolveSmdp => commands::solve_smdp(config, out),
        Command::Equilibrium => commands::equilibrium(config, out),
        Command::Staircase => commands::staircase(config, out),
        Command::Simulate { target } => commands::simulate(config, target, out),
    }
}

pub fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let config = resolve_config(cli)?;
    execute(cli.command, &config, &cli.out)
}

/// Process exit code for an error: 2 configuration, 3 I/O, 4 numerical,
/// 1 anything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use hybrid_assoc::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Parse { .. } => 2,
                CliError::Io { .. } | CliError::Csv { .. } => 3,
            };
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Config(_) | E::Domain(_) | E::Table(_) => 2,
                E::Io(_) | E::Csv(_) => 3,
                E::Numerical { .. } | E::Convergence { .. } | E::Singular { .. } => 4,
                E::Contract(_) => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    1
}
