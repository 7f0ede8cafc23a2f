//! `superbunch`: runs simulations, the g2 table sweep and calibration, and
//! converts time-tag and trace files.
//!
//! Exit codes: 0 on success, 2 for configuration or usage errors, 3 for
//! runtime and numerical failures.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "superbunch", version, about = "Superbunching pseudothermal light simulator")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one experiment and write its histogram, g2(tau), fit and summary.
    Run(RunArgs),
    /// g2_m next to g2_c at several mean photon numbers, one row per config.
    Table1(Table1Args),
    /// Solve coherent fraction and drive amplitude for a list of target g2 values.
    Calibrate(CalibrateArgs),
    /// Photon statistics of recorded time tags.
    Import(ImportArgs),
    /// Write a simulated intensity trace or detected time tags.
    Export(ExportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Binary,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Pseudothermal,
    TwoTimescale,
    Table1Base,
}

#[derive(Args)]
pub struct Common {
    /// TOML experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in config used when no --config is given.
    #[arg(long, value_enum, conflicts_with = "config")]
    preset: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Stdout format: csv prints `key,value` lines, json the summary document.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
pub struct Table1Args {
    /// One config per row; repeat the flag. Without it the calibrated ladder is used.
    #[arg(long = "config")]
    configs: Vec<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Targets for the default calibrated ladder.
    #[arg(long, value_delimiter = ',', conflicts_with = "configs")]
    targets: Option<Vec<f64>>,
    /// csv or json replace the aligned text on stdout.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<f64>>,
}

#[derive(Args)]
pub struct ImportArgs {
    /// One time-tag file, or two for a coincidence histogram between them.
    #[arg(required = true, num_args = 1..=2)]
    paths: Vec<PathBuf>,
    /// Input format: csv is the text format, one picosecond tag per line.
    /// Inferred from the extension (`.bin` is binary) when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Counting window in seconds.
    #[arg(long, default_value_t = 5e-6)]
    window: f64,
    /// Number of windows (default: as many as fit in the first file's span).
    #[arg(long)]
    n_windows: Option<u64>,
    /// Coincidence bin in seconds.
    #[arg(long, default_value_t = 165e-12)]
    bin: f64,
    #[arg(long, default_value_t = 20e-6)]
    max_lag: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportWhat {
    /// Detected photon time tags.
    Tags,
    /// Intensity trace at the detectors.
    Trace,
}

#[derive(Args)]
pub struct ExportArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "tags")]
    what: ExportWhat,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Tags only: 2 puts a 50:50 splitter in front of two detectors.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    channels: u8,
}

/// User-facing failure, split by exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
}

impl From<superbunch::Error> for Failure {
    fn from(e: superbunch::Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(a) => commands::run(a),
        Command::Table1(a) => commands::table1(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Import(a) => commands::import(a),
        Command::Export(a) => commands::export(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.workers {
        Some(0) => Err(Failure::Config("--workers must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(Failure::Runtime(e.to_string())),
        },
        None => dispatch(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("superbunch: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("superbunch: error: {msg}");
            ExitCode::from(3)
        }
    }
}
