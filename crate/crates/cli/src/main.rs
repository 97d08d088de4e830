use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use stlsgd_cli::{sweep, ExperimentConfig, SweepOptions};

/// Simulate stagewise local SGD and its baselines, writing CSV traces.
#[derive(Debug, Parser)]
#[command(name = "stlsgd", version)]
struct Args {
    /// Experiment config file; repeat to run a sweep.
    #[arg(long = "config", value_name = "PATH", required = true)]
    configs: Vec<PathBuf>,
    /// Directory for traces and the summary table.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Overrides the seed of every config.
    #[arg(long)]
    seed: Option<u64>,
    /// Only print errors.
    #[arg(long)]
    quiet: bool,
    /// Run configs concurrently.
    #[arg(long)]
    concurrent: bool,
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var("STLSGD_THREADS") {
        let n: usize = raw.trim().parse().with_context(|| format!("STLSGD_THREADS={raw} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let mut configs = Vec::with_capacity(args.configs.len());
    for path in &args.configs {
        match ExperimentConfig::load(path) {
            Ok(c) => configs.push(c),
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
    }
    let opts = SweepOptions { seed: args.seed, concurrent: args.concurrent };
    match sweep(&configs, &args.out, &opts) {
        Ok(report) => {
            for (label, err) in report.failures() {
                eprintln!("error: {label}: {err}");
            }
            if !args.quiet {
                println!("summary: {}", report.summary_path.display());
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
