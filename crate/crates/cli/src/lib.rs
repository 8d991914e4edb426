//! Experiment driver for the `liquidex` command-line tool.
//!
//! Each subcommand reads an [`config::ExperimentConfig`], writes CSV tables
//! and a `manifest.json` with SHA-256 checksums into the output directory,
//! and prints one line per check.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::Path;

pub use commands::{Check, CommandKind, Status};
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub sweep_parameter: Option<config::SweepParameter>,
}

/// Load, override and resolve the configuration, then run `kind` into `out`.
pub fn run(
    kind: CommandKind,
    config: Option<&Path>,
    out: &Path,
    overrides: &Overrides,
) -> CliResult<Vec<Check>> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(n) = overrides.paths {
        cfg.monte_carlo.n_paths = n;
    }
    if let Some(param) = overrides.sweep_parameter {
        if param != cfg.sweep.parameter {
            cfg.sweep.parameter = param;
            cfg.sweep.values = None;
        }
    }
    let cfg = cfg.resolve()?;
    log::info!("running {} with seed {}", kind.name(), cfg.seed);
    let dir = output::OutputDir::create(out)?;
    commands::execute(kind, &cfg, dir)
}
