//! `bohmsim`: one run per invocation. Each verb resolves a flat key-value
//! config (defaults, optional preset, config file, `--seed` override, in
//! that order), executes its pipeline into `--out`, and writes a manifest
//! listing every artifact. `BOHMSIM_THREADS` caps worker threads; it is the
//! only environment variable the tool reads.

// Validation uses `!(v > 0.0)` so NaN is rejected along with the sign.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod dw1d;
mod equiv;
mod manifest;
mod render;
mod sim2d;
mod traj;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{Config, Mode, Preset};

#[derive(Parser)]
#[command(name = "bohmsim", version, about = "Waveguide propagation, double-well tables, Bohmian trajectory batches, and field rendering")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value config file; omitted keys take documented defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// RNG seed override; wins over a `seed` key in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Baseline scale for sim2d runs.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Double-well levels, tunnel oscillation table, barrier current profile.
    Dw1d(RunArgs),
    /// 2D waveguide propagation with region table and snapshot series.
    Sim2d(RunArgs),
    /// Trajectory batch over a stored sim2d snapshot series.
    Traj(RunArgs),
    /// Born-rule ensemble check over a stored sim2d snapshot series.
    Equiv(RunArgs),
    /// Render a stored field file to a PPM image.
    Render(RunArgs),
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Ok(threads) = std::env::var("BOHMSIM_THREADS") {
        let n: usize = threads
            .parse()
            .with_context(|| format!("BOHMSIM_THREADS must be a positive integer, got `{threads}`"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }

    let cli = Cli::parse();
    type RunFn = fn(&Config, &std::path::Path) -> Result<()>;
    let (mode, args, run): (Mode, &RunArgs, RunFn) = match &cli.cmd {
        Cmd::Dw1d(a) => (Mode::Dw1d, a, dw1d::run),
        Cmd::Sim2d(a) => (Mode::Sim2d, a, sim2d::run),
        Cmd::Traj(a) => (Mode::Traj, a, traj::run),
        Cmd::Equiv(a) => (Mode::Equivariance, a, equiv::run),
        Cmd::Render(a) => (Mode::Render, a, render::run),
    };
    let cfg = Config::resolve(mode, args.config.as_deref(), args.preset, args.seed)?;
    run(&cfg, &args.out)
}
