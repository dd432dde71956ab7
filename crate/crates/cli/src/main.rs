use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mixfbm_cli::{run, CliError, Command, RunConfig};

/// Output directory used when neither `--out` nor the config names one.
const ENV_OUT_DIR: &str = "MIXFBM_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "mixfbm", version, about = "Slow-fast systems driven by mixed fractional Brownian motion")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides the environment and the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Escalate stability and schedule warnings to errors.
    #[arg(long, global = true)]
    strict: bool,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Sample fBm paths and check their covariance.
    SampleFbm,
    /// Simulate slow-fast trajectories.
    Solve,
    /// Measure the distance to the averaged system as delta shrinks.
    Average,
    /// Minimize the rate-function energy for an endpoint or half-space.
    Rate,
    /// Estimate rare-event probabilities by Monte Carlo.
    Mc,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let path = cli.config.ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.strict |= cli.strict;
    if let Some(n) = cli.workers {
        mixfbm::par::init_workers(n)?;
    }
    let out = cli
        .out
        .or_else(|| std::env::var_os(ENV_OUT_DIR).map(PathBuf::from))
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| {
        CliError::Config(format!("no output directory: pass --out, set {ENV_OUT_DIR} or `output_dir`"))
    })?;
    let cmd = match cli.command {
        Cmd::SampleFbm => Command::SampleFbm,
        Cmd::Solve => Command::Solve,
        Cmd::Average => Command::Average,
        Cmd::Rate => Command::Rate,
        Cmd::Mc => Command::Mc,
    };
    let manifest = run(cmd, &cfg, &out)?;
    log::info!("wrote {} artifacts to {}", manifest.artifacts.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
