//! `gcmf` — runs the protocol checks and simulations from a TOML config.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use commands::{Failure, Report};
use config::ExperimentConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gcmf", version, about = "Symmetric measurement-and-feedforward protocol checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `trials` from the config.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Write per-branch records here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Lemma 3, Lemma 4, slide-through and an enumerated protocol run.
    VerifyAbelian,
    /// Run the abelian protocol and print one record per branch or trial.
    RunAbelian,
    /// Join-and-measure for the D8 SPT or GHZ state.
    RunD8,
    /// Every phase label of a group with its Lemma 3 verdict.
    PhaseDiagram,
    /// Ancilla lifts of quasi-commuting unitaries.
    LiftCheck,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).map_err(Failure::Config)?,
        None => ExperimentConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.trials.is_some() {
        cfg.trials = cli.trials;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<Report, Failure> {
    let cfg = load(cli)?;
    let report = match cli.command {
        Command::VerifyAbelian => commands::verify_abelian(&cfg),
        Command::RunAbelian => commands::run_abelian(&cfg),
        Command::RunD8 => commands::run_d8(&cfg),
        Command::PhaseDiagram => commands::phase_diagram(&cfg),
        Command::LiftCheck => commands::lift_check(&cfg),
    }?;
    if let Some(records) = &report.records {
        match &cfg.out {
            Some(path) => std::fs::write(path, records)
                .map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?,
            None => print!("{records}"),
        }
    }
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(report) => {
            print!("{}", report.text);
            ExitCode::from(if report.ok { 0 } else { 1 })
        }
        Err(f) => {
            let msg = match &f {
                Failure::Config(m) => format!("config error: {m}"),
                Failure::Check(m) => format!("error: {m}"),
            };
            eprintln!("{msg}");
            ExitCode::from(f.code() as u8)
        }
    }
}
