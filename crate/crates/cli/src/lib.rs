//! Batch driver for the robin-cde column solver: reads a TOML run
//! configuration, runs a command and writes CSV results plus a manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{Overrides, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "robin-cde", version, about = "Solute transport in a finite column with flux-type boundaries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, overriding [output].dir.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Number of sampled positions.
    #[arg(long, global = true)]
    pub nx: Option<usize>,
    /// Number of sampled times.
    #[arg(long, global = true)]
    pub nt: Option<usize>,
    /// Largest mode index of the series.
    #[arg(long, global = true)]
    pub modes: Option<usize>,
    /// Target truncation bound.
    #[arg(long, global = true)]
    pub tail_tol: Option<f64>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Concentration profiles and breakthrough curves.
    Solve,
    /// Mass-balance audit and finite-difference comparison.
    Verify,
    /// Compare against the Neumann-exit variant.
    CompareDanckwerts,
    /// Columns in series, each fed by its upstream neighbour's exit.
    Chain,
}

impl Cli {
    pub fn load_config(&self) -> CliResult<RunConfig> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
        let overrides = Overrides {
            out: self.out.clone(),
            nx: self.nx,
            nt: self.nt,
            modes: self.modes,
            tail_tol: self.tail_tol,
        };
        RunConfig::load(path, &overrides)
    }

    pub fn run(&self) -> CliResult<()> {
        let cfg = self.load_config()?;
        match self.command {
            Command::Solve => commands::solve(&cfg, self.quiet).map(drop),
            Command::Verify => commands::verify(&cfg, self.quiet).map(drop),
            Command::CompareDanckwerts => commands::compare_danckwerts(&cfg, self.quiet).map(drop),
            Command::Chain => commands::chain(&cfg, self.quiet).map(drop),
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.run() {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
