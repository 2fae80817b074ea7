//! `skt`: equilibria, neutral curves, Landau signs, Hopf conditions,
//! continuation and time integration from a JSON run configuration.

mod commands;
mod config;
mod error;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "skt", version, about = "Bifurcation analysis of the SKT cross-diffusion competition model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Homogeneous states, regime and linearisation.
    Equilibria,
    /// Neutral stability curves and their crossings.
    NeutralCurves,
    /// Sign of the Landau coefficient at a point or over a grid.
    Landau,
    /// Necessary condition for Hopf bifurcation along d21.
    Hopf,
    /// Homogeneous branch scan with branch switching.
    Continue,
    /// Implicit time integration with asymptotic verdict.
    Simulate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Equilibria => "equilibria",
            Command::NeutralCurves => "neutral-curves",
            Command::Landau => "landau",
            Command::Hopf => "hopf",
            Command::Continue => "continue",
            Command::Simulate => "simulate",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = config::load(cli.config.as_deref())?;
    std::fs::create_dir_all(&cli.out)?;
    skt_core::continuation::write_atomic(&cli.out.join("config.json"), &config::to_json(&config))?;
    let out: &Path = &cli.out;
    match cli.command {
        Command::Equilibria => commands::equilibria(&config, out),
        Command::NeutralCurves => commands::neutral_curves(&config, out),
        Command::Landau => commands::landau(&config, out),
        Command::Hopf => commands::hopf(&config, out),
        Command::Continue => commands::continuation(&config, out),
        Command::Simulate => commands::simulate(&config, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn })
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("skt {}: {e}", cli.command.name());
            let diagnostic = e.diagnostic(cli.command.name());
            if std::fs::create_dir_all(&cli.out).is_ok() {
                let mut bytes = serde_json::to_vec_pretty(&diagnostic).unwrap_or_default();
                bytes.push(b'\n');
                let _ = skt_core::continuation::write_atomic(&cli.out.join("diagnostic.json"), &bytes);
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
