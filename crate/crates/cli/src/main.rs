//! `decoup`: partitions, checks and decoupling-ratio experiments for the
//! surface `(ξ₁, ξ₂, ξ₃, ξ₁⁴ + ξ₂⁴ + ξ₃⁴)`.
//!
//! Exit codes: 0 success, 1 a check or cell failed, 2 invalid
//! configuration, 3 file IO.

mod caps_cmd;
mod config;
mod error;
mod out;
mod run;
mod svg;
mod verify;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "decoup", version, about = "Decoupling partitions and ratio experiments")]
struct Cli {
    /// INI file; keys in the unnamed section and in `[<command>]` set defaults, flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root for hash-keyed output directories (also DECOUP_RESULTS_DIR).
    #[arg(long = "results-dir", global = true)]
    results_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a cap family and write it as JSON, CSV and SVG.
    Caps(caps_cmd::CapsArgs),
    /// Partition, conjugation and phase-condition checks.
    Verify(verify::VerifyArgs),
    /// One decoupling ratio.
    Ratio(run::RatioArgs),
    /// Ratios over a grid of scales, exponents, ensembles and seeds, with growth fits.
    Sweep(run::SweepArgs),
    /// Redraw the ratio plot of a results directory.
    Plot(run::PlotArgs),
}

pub struct Global {
    pub config: Option<PathBuf>,
    pub results_dir: Option<PathBuf>,
}

/// Contents of `config.json`.
#[derive(Serialize)]
pub struct Tagged<'a, T> {
    pub command: &'a str,
    pub hash: &'a str,
    pub config: &'a T,
}

pub fn tagged<'a, T>(command: &'a str, hash: &'a str, config: &'a T) -> Tagged<'a, T> {
    Tagged { command, hash, config }
}

fn main() {
    let cli = Cli::parse();
    let g = Global {
        config: cli.config,
        results_dir: cli.results_dir,
    };
    let res = match &cli.command {
        Command::Caps(a) => caps_cmd::run(&g, a),
        Command::Verify(a) => verify::run(&g, a),
        Command::Ratio(a) => run::ratio(&g, a),
        Command::Sweep(a) => run::sweep(&g, a),
        Command::Plot(a) => run::plot(&g, a),
    };
    if let Err(e) = res {
        eprintln!("decoup: {e}");
        std::process::exit(e.exit_code());
    }
}
