use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use qmeter_cli::config::{Config, Kind};
use qmeter_cli::run::{run_experiment, write_bundle};
use qmeter_cli::CliError;

#[derive(Parser)]
#[command(name = "qmeter", about = "Measurement-as-symmetry-breaking simulators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config with per-module sections; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trial count (overrides the config).
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Worker thread count; 0 lets the runtime pick.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory for summary.json and tables (default: print summary).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Escalate quality warnings (e.g. a high undecided fraction) to exit 4.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Single-apparatus measurement ensemble.
    Measure,
    /// EPR pair run at one pair of detector angles.
    Epr,
    /// Four-configuration CHSH statistic.
    Chsh,
    /// Reheating-era density-fluctuation power spectrum.
    CosmoSpectrum,
    /// Astrophysical sanity constants (deterministic, no seed).
    AstroConstants,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qmeter: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<ExitCode, CliError> {
    let kind = match cli.command {
        Command::Measure => Kind::Measure,
        Command::Epr => Kind::Epr,
        Command::Chsh => Kind::Chsh,
        Command::CosmoSpectrum => Kind::CosmoSpectrum,
        Command::AstroConstants => Kind::AstroConstants,
    };
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(n) = cli.n {
        cfg.n = n;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    let bundle = run_experiment(kind, &cfg)?;
    match &cli.out {
        Some(dir) => write_bundle(&bundle, dir)?,
        None => print!("{}", bundle.summary_json),
    }
    if bundle.quality_warning {
        eprintln!("qmeter: quality warning: undecided fraction exceeds 10%");
        if cli.strict {
            return Ok(ExitCode::from(4));
        }
    }
    Ok(ExitCode::SUCCESS)
}
