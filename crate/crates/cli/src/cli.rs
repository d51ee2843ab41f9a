//! Argument parsing.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{parse_phi, CommandKind, GridSize, Invocation};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "magsqueeze", version, about = "Squeezed output spectra of a driven cavity magnomechanical system")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed for stochastic checks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Grid size, N or NxM (ω points × second axis).
    #[arg(long, global = true)]
    pub grid: Option<GridSize>,
    /// Homodyne phase as a multiple of π.
    #[arg(long, global = true, value_parser = parse_phi, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    /// Use one phase for the whole ω range instead of the per-ω optimum.
    #[arg(long, global = true)]
    pub global_phi: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Output spectrum on a ω grid at fixed phases.
    Spectrum,
    /// Two-dimensional or family sweep, selected by the config.
    Sweep,
    /// Optimal homodyne phase versus ω.
    OptimizePhase,
    /// Stability analysis of the drift matrix.
    Stability,
    /// Drive power at which stability is lost.
    Threshold,
    /// Highest temperature that still shows squeezing.
    Ceiling,
    /// Resolved parameters and validity ratios.
    Params,
    /// Internal consistency checks and Monte Carlo comparison.
    Verify,
}

impl From<Command> for CommandKind {
    fn from(c: Command) -> Self {
        match c {
            Command::Spectrum => CommandKind::Spectrum,
            Command::Sweep => CommandKind::Sweep,
            Command::OptimizePhase => CommandKind::OptimizePhase,
            Command::Stability => CommandKind::Stability,
            Command::Threshold => CommandKind::Threshold,
            Command::Ceiling => CommandKind::Ceiling,
            Command::Params => CommandKind::Params,
            Command::Verify => CommandKind::Verify,
        }
    }
}

impl Cli {
    pub fn invocation(self) -> Result<Invocation, CliError> {
        let config = self
            .config
            .ok_or_else(|| CliError::Config("missing required option --config <path>".into()))?;
        Ok(Invocation {
            command: self.command.into(),
            config,
            out: self.out,
            seed: self.seed,
            grid: self.grid,
            phi_over_pi: self.phi,
            global_phi: self.global_phi,
        })
    }
}
