use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use christoffel_lab::experiments::{
    emit_plots, run_green_check, run_opoly_bounds, run_qc_constant, run_theorem1, run_theorem2,
    ExperimentConfig, Report,
};

#[derive(Parser)]
#[command(
    name = "chlab",
    version,
    about = "Christoffel function experiments on planar domains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Plain-text key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV and SVG files (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized probes (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Two-sided ratio lambda_n rho^-2 / weight product on a quasidisk.
    Theorem1,
    /// Decay of lambda_n at the cusp tip.
    Theorem2,
    /// Upper envelope and blockwise lower statistic for orthonormal polynomials.
    Opoly {
        /// Block factor k in n < j <= k n (defaults to the config value).
        #[arg(long)]
        k: Option<usize>,
    },
    /// Three-point quasiconformality constant estimate.
    QcConstant,
    /// Green function residual, positivity and level-curve checks.
    GreenCheck,
}

fn run(cli: Cli) -> christoffel_lab::Result<bool> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let report: Box<dyn Report> = match cli.command {
        Command::Theorem1 => Box::new(run_theorem1(&cfg)?),
        Command::Theorem2 => Box::new(run_theorem2(&cfg)?),
        Command::Opoly { k } => Box::new(run_opoly_bounds(&cfg, k.unwrap_or(cfg.k_factor))?),
        Command::QcConstant => Box::new(run_qc_constant(&cfg)?),
        Command::GreenCheck => Box::new(run_green_check(&cfg)?),
    };
    for line in report.summary() {
        println!("{line}");
    }
    for path in emit_plots(report.as_ref(), &cfg.out_dir)? {
        println!("wrote {}", path.display());
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
