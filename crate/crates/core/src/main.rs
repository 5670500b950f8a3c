use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use autoresonance::config::RunConfig;
use autoresonance::run::{run, Experiment, RunOptions};
use autoresonance::Error;

/// Autoresonant capture of a driven Duffing resonator.
#[derive(Parser)]
#[command(name = "autoresonance", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed. A fresh seed is drawn and recorded when absent.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (must be empty or absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert circuit parameters to model units.
    Convert,
    /// Integrate one trajectory through the chirp.
    Trajectory,
    /// Monte Carlo locking probability against drive.
    Scan,
    /// Threshold sensitivity to the initial state.
    Kappa,
    /// Zero-temperature threshold against chirp rate.
    AlphaScaling,
    /// Threshold width against temperature.
    TempSweep,
    /// Phase-space density evolution.
    Wigner(WignerArgs),
}

#[derive(Args)]
struct WignerArgs {
    /// n10, n7, n5 or classical.
    #[arg(long)]
    preset: Option<String>,
    /// Points per axis (power of two).
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    dtau: Option<f64>,
    /// Stop at this τ instead of the end of the chirp.
    #[arg(long, allow_negative_numbers = true)]
    until: Option<f64>,
    /// Snapshot cadence in τ.
    #[arg(long)]
    snapshot_every: Option<f64>,
    /// Damp sub-grid filaments with a spectral filter.
    #[arg(long)]
    filter: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let experiment = match cli.command {
        Command::Convert => Experiment::Convert,
        Command::Trajectory => Experiment::Trajectory,
        Command::Scan => Experiment::Scan,
        Command::Kappa => Experiment::Kappa,
        Command::AlphaScaling => Experiment::AlphaScaling,
        Command::TempSweep => Experiment::TempSweep,
        Command::Wigner(w) => {
            let e = &mut cfg.experiment;
            e.preset = w.preset.or(e.preset.take());
            e.grid = w.grid.unwrap_or(e.grid);
            e.dtau = w.dtau.or(e.dtau);
            e.until = w.until.or(e.until);
            e.snapshot_every = w.snapshot_every.or(e.snapshot_every);
            e.filter |= w.filter;
            Experiment::Wigner
        }
    };
    let opts = RunOptions {
        seed: cli.seed,
        workers: cli.workers,
        out: cli.out,
    };
    let manifest = run(experiment, &cfg, &opts)?;
    println!(
        "{} complete: {} files, seed {}",
        experiment.name(),
        manifest.outputs.len() + 1,
        manifest.seed
    );
    Ok(())
}
