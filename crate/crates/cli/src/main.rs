mod config;
mod error;
mod modes;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{ExperimentConfig, Mode, Setup};
use error::CliError;

const THREADS_ENV: &str = "TELEGRAPHNET_THREADS";

/// Telegrapher's equations on tree networks: simulation, weighted estimates
/// and coefficient reconstruction.
#[derive(Debug, Parser)]
#[command(name = "telegraphnet", version)]
struct Args {
    mode: Mode,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    plot: bool,
    /// Worker threads; overrides the environment variable.
    #[arg(long)]
    threads: Option<usize>,
}

fn threads(args: &Args) -> Result<Option<usize>, CliError> {
    if args.threads.is_some() {
        return Ok(args.threads);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("{THREADS_ENV} = {v:?} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn run(args: &Args) -> Result<(), CliError> {
    if let Some(n) = threads(args)? {
        if n == 0 {
            return Err(CliError::Config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let (config, network) = ExperimentConfig::load(&args.config)?;
    if let Some(m) = config.mode {
        if m != args.mode {
            return Err(CliError::Config(format!(
                "config is for mode {} but {} was requested",
                m.name(),
                args.mode.name()
            )));
        }
    }
    let setup = Setup::build(config, &network)?;
    let report = modes::run(args.mode, &setup, &args.out, args.plot)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", report.summary);
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
