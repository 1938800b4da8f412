//! `pcgscreen` command-line front end.

mod cache;
mod commands;
mod config;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::PipelineConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "pcgscreen", version, about = "Multi-channel phonocardiogram CAD screening")]
struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Enforce the strict epoch, grid, and voting checks.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate a synthetic dataset at the configured manifest location.
    Synth,
    /// Preprocess every recording into the epoch cache.
    Preprocess,
    /// Extract per-channel feature matrices.
    Extract,
    /// Repeated cross-validation of the configured channels.
    Evaluate,
    /// Evaluate every channel subset.
    Search,
    /// Train on the full training cohort and predict the held-out cohort.
    Predict,
    /// Tables and plots.
    Report,
}

fn run(cli: &Cli) -> Result<serde_json::Value, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::config("--config is required"))?;
    let cfg = PipelineConfig::load(path)?.resolve(cli.seed, cli.strict)?;
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::config("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    match cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Preprocess => commands::preprocess(&cfg),
        Command::Extract => commands::extract(&cfg),
        Command::Evaluate => commands::evaluate(&cfg),
        Command::Search => commands::search(&cfg),
        Command::Predict => commands::predict(&cfg),
        Command::Report => commands::report(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::config(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.kind.exit_code() as u8);
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.kind.exit_code() as u8)
        }
    }
}
