//! Command-line driver for `atrt-core`: configuration, file formats and the
//! `phantom`, `forward`, `recon`, `singscan` and `verify` subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod singscan;
pub mod verify;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{Command, Overrides, RunConfig};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "atrt", version, about = "Joint attenuation/source reconstruction from attenuated Radon data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: SubCommand,
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Grid size: the phantom grid, or the reconstruction grid for `recon`.
    #[arg(long, global = true, value_name = "M")]
    pub grid: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub projections: Option<usize>,
    /// Relative Gaussian noise level.
    #[arg(long, global = true, value_name = "LEVEL")]
    pub noise: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum SubCommand {
    /// Write the attenuation and source images of a phantom.
    Phantom,
    /// Simulate a sinogram, optionally noisy.
    Forward,
    /// Joint reconstruction of attenuation and source.
    Recon,
    /// Singularity scans and boundary recovery on grid-free phantoms.
    Singscan,
    /// Run the property checks.
    Verify,
}

impl From<SubCommand> for Command {
    fn from(s: SubCommand) -> Self {
        match s {
            SubCommand::Phantom => Command::Phantom,
            SubCommand::Forward => Command::Forward,
            SubCommand::Recon => Command::Recon,
            SubCommand::Singscan => Command::Singscan,
            SubCommand::Verify => Command::Verify,
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let over = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        grid: cli.grid,
        projections: cli.projections,
        noise: cli.noise,
    };
    let command = Command::from(cli.command);
    let cfg = RunConfig::load(cli.config.as_deref(), &over, command)?;
    commands::run(&cfg, command)
}
