//! `fractint`: config-driven experiments over sparse dyadic-grid sets.
//!
//! Exit status: 0 for clean or informational runs, 2 when a fitted slope
//! violates its predicted bound, 1 on errors.

mod config;
mod emit;
mod report;
mod runner;

use clap::Parser;
use config::Config;
use runner::{RunOutcome, RunRequest};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fractint", version, about = "dyadic-grid intersection experiments")]
struct Cli {
    /// Experiment name (construct, dims, energy, fourier, hyperplane,
    /// intersect-translate, intersect-rotate, intersect-dilate, levelset,
    /// maximal, two-surface, inverse, count, average-slope) or `report`.
    experiment: String,
    /// Config file; required for everything except `report`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default `results`).
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Recompute even when a cached run exists.
    #[arg(long)]
    force: bool,
    /// Result directories to merge (report only).
    dirs: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Ok(raw) = std::env::var("FRACTINT_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = fractint_core::set_worker_threads(n) {
                    eprintln!("error: FRACTINT_THREADS: {e}");
                    return ExitCode::from(1);
                }
            }
            _ => {
                eprintln!("error: FRACTINT_THREADS must be a positive integer");
                return ExitCode::from(1);
            }
        }
    }

    if cli.experiment == "report" {
        return match report::report(&cli.dirs, &cli.out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        };
    }

    let Some(config_path) = cli.config.as_ref() else {
        eprintln!("error: --config is required for `{}`", cli.experiment);
        return ExitCode::from(1);
    };
    let text = match std::fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", config_path.display());
            return ExitCode::from(1);
        }
    };
    let cfg = match Config::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    // config may also name the experiment; the subcommand wins but they must
    // agree when both are present
    if let Some(named) = cfg.get("run", "experiment") {
        if named != cli.experiment {
            eprintln!(
                "error: config names experiment `{named}` but `{}` was requested",
                cli.experiment
            );
            return ExitCode::from(1);
        }
    }
    let seed = cli.seed.unwrap_or_else(|| {
        cfg.get("run", "seed").and_then(|s| s.parse().ok()).unwrap_or(0)
    });
    let req = RunRequest {
        experiment: cli.experiment.clone(),
        config: &cfg,
        seed,
        out: cli.out.clone(),
        force: cli.force,
    };
    match runner::run(&req) {
        Ok(RunOutcome::Clean) => ExitCode::SUCCESS,
        Ok(RunOutcome::BoundViolated) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
