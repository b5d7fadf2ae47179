//! Experiment runner for the nanoplate solver and unique-continuation lab.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod verify;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use error::CliError;
use output::Sink;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "nanoplate", version, about = "Strain-gradient nanoplate experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Solve the Neumann problem and write the field and diagnostics.
    Solve,
    /// h-refinement study against a manufactured field.
    Convergence,
    /// Empirical Carleman constants over a tau range.
    CarlemanSweep,
    /// Doubling, three-sphere and Caccioppoli reports.
    UcLab,
    /// Run the invariant suite.
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Convergence => "convergence",
            Command::CarlemanSweep => "carleman-sweep",
            Command::UcLab => "uc-lab",
            Command::Verify => "verify",
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None if matches!(cli.command, Command::Verify | Command::CarlemanSweep | Command::UcLab) => {
            ExperimentConfig::parse("")?
        }
        None => return Err(CliError::Config(format!("`{}` needs --config PATH", cli.command.name()))),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        nanoplate_core::exec::set_thread_cap(n);
    }
    let cfg = load_config(cli)?;
    let mut sink = Sink::new(&cli.out, cli.command.name(), cfg.hash())?;
    match cli.command {
        Command::Solve => commands::solve(&cfg, &mut sink).map(drop),
        Command::Convergence => {
            let summary = commands::convergence(&cfg, &mut sink)?;
            if summary["passed"] == true {
                Ok(())
            } else {
                Err(CliError::Numerical(format!(
                    "convergence rate {} below {}",
                    summary["slope"], summary["required_slope"]
                )))
            }
        }
        Command::CarlemanSweep => commands::carleman(&cfg, &mut sink).map(drop),
        Command::UcLab => commands::uc_lab(&cfg, &mut sink).map(drop),
        Command::Verify => {
            let suite = verify::verify(cfg.seed(), &mut sink)?;
            let failed: Vec<String> = suite.failures().map(|c| format!("{}: {}", c.module, c.property)).collect();
            if failed.is_empty() {
                println!("verify: {} checks passed", suite.checks.len());
                Ok(())
            } else {
                Err(CliError::Numerical(format!("{} invariant(s) failed:\n  {}", failed.len(), failed.join("\n  "))))
            }
        }
    }
}
