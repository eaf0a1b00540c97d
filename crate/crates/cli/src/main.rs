//! `mfpc`: solve, sweep, self-check and simulate decoding for mean-field
//! uplink power-control equilibria.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfpc_core::decoding::SicVariant;
use mfpc_core::game::Protocol;

use config::{Overrides, RunConfig};
use error::CliError;
use output::OutDir;

/// Environment variable that caps the worker thread count.
const THREADS_ENV: &str = "MFPC_THREADS";

#[derive(Parser)]
#[command(
    name = "mfpc",
    version,
    about = "Mean-field power-control equilibria under CDMA and NOMA"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one equilibrium and write the per-user table.
    Solve(Common),
    /// Compare both protocols over a grid of penalties and seeds.
    Sweep(Common),
    /// Cross-check the solver against closed-form and brute-force oracles.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        /// Test hook: perturb the best response under test.
        #[arg(long, hide = true)]
        corrupt_best_response: bool,
    },
    /// Monte-Carlo SIC decoding at the solved equilibrium.
    DecodeSim {
        #[command(flatten)]
        common: Common,
        /// Monte-Carlo trials.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        variant: Option<SicVariant>,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file; the built-in reference configuration if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    protocol: Option<Protocol>,
    /// Comma-separated penalties (single-run commands use the first).
    #[arg(long, value_parser = parse_betas)]
    beta: Option<Betas>,
    /// Comma-separated seeds, `a..b` for a half-open range.
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<Seeds>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "mfpc-out")]
    out: PathBuf,
}

#[derive(Clone)]
struct Betas(Vec<f64>);
#[derive(Clone)]
struct Seeds(Vec<u64>);

fn parse_betas(s: &str) -> Result<Betas, String> {
    config::parse_f64_list(s).map(Betas)
}

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    config::parse_seed_list(s).map(Seeds)
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))
}

fn prepare(
    common: &Common,
    trials: Option<usize>,
    variant: Option<SicVariant>,
) -> Result<(RunConfig, OutDir), CliError> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    cfg.apply(&Overrides {
        protocol: common.protocol,
        betas: common.beta.clone().map(|b| b.0),
        seeds: common.seeds.clone().map(|s| s.0),
        tol: common.tol,
        max_iter: common.max_iter,
        trials,
        variant,
    })?;
    cfg.validate()?;
    Ok((cfg, OutDir::create(&common.out)?))
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    init_threads()?;
    match cli.command {
        Command::Solve(common) => {
            let (cfg, out) = prepare(&common, None, None)?;
            commands::solve(&cfg, &out)
        }
        Command::Sweep(common) => {
            let (cfg, out) = prepare(&common, None, None)?;
            commands::sweep(&cfg, &out)
        }
        Command::OracleCheck {
            common,
            corrupt_best_response,
        } => {
            let (cfg, out) = prepare(&common, None, None)?;
            commands::oracle_check(&cfg, &out, corrupt_best_response)
        }
        Command::DecodeSim {
            common,
            trials,
            variant,
        } => {
            let (cfg, out) = prepare(&common, trials, variant)?;
            commands::decode_sim(&cfg, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("mfpc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
