//! `perilib`: runs one experiment from a TOML config and writes CSV/JSON
//! results into an output directory.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use error::{CliError, CliResult};
use output::Sink;

#[derive(Parser)]
#[command(name = "perilib", version, about = "Planar secular three-body experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// experiment config (TOML)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// overrides the config's `seed`
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// overrides `[output] dir`
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// level sets of the averaged energy and its equilibria
    Portrait,
    /// check the renormalizing identity and the commutation bracket
    VerifyRenorm,
    /// integrate one orbit, or the libration experiment
    Evolve,
    /// evaluate the libration theorem's hypotheses
    CheckTheorem,
    /// iterate homological steps on the desk-scale model
    Normalform,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Portrait => "portrait",
            Command::VerifyRenorm => "verify-renorm",
            Command::Evolve => "evolve",
            Command::CheckTheorem => "check-theorem",
            Command::Normalform => "normalform",
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let path = cli.config.ok_or_else(|| CliError::Config("--config <PATH> is required".into()))?;
    let cfg = ExperimentConfig::load(&path)?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let dir = cli.out.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let sink = Sink::new(dir, cli.command.name(), seed)?;
    match cli.command {
        Command::Portrait => commands::portrait(&cfg, &sink),
        Command::VerifyRenorm => commands::verify_renorm(&cfg, seed, &sink),
        Command::Evolve => commands::evolve(&cfg, &sink),
        Command::CheckTheorem => commands::check_theorem(&cfg, &sink),
        Command::Normalform => commands::normalform(&cfg, &sink),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("perilib: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
