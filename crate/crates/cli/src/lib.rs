//! Command-line front end: trace ingestion, manifests, the analysis
//! pipeline and report emission.

pub mod commands;
pub mod error;
pub mod ingest;
pub mod manifest;
pub mod pipeline;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use spiralres_core::sweeps::SweepKind;

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "spiralres",
    version,
    about = "Design and measurement analysis for superconducting spiral resonators"
)]
pub struct Cli {
    /// Worker threads for trace fitting; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Sweep manifest; repeat where a command takes several.
    #[arg(long = "manifest", required = true)]
    pub manifests: Vec<PathBuf>,

    /// Directory for report.json and plot CSVs; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Relative cost tolerance of the reflection fits.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inductance, frequency and impedance of a spiral geometry.
    Design {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit one reflection trace.
    FitTrace {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Quasiparticle fits of a temperature sweep.
    FitTemp(FitArgs),
    /// TLS fit of a power sweep.
    FitPower(FitArgs),
    /// Joint fit of one temperature and one power sweep.
    FitCombined(FitArgs),
    /// Field sweeps; two or more resonators add a g-factor fit.
    FitField(FitArgs),
    /// Write a synthetic dataset in the ingestion formats.
    Synth {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Every analysis that applies to the given manifests.
    Report(FitArgs),
}

fn options(tolerance: Option<f64>) -> Result<pipeline::RunOptions> {
    if let Some(t) = tolerance {
        if !(t > 0.0 && t < 1.0) {
            return Err(CliError::Validation(format!(
                "--tolerance must lie in (0, 1), got {t}"
            )));
        }
    }
    Ok(pipeline::RunOptions { tolerance })
}

fn emit(report: &report::Report, out: Option<&Path>) -> Result<()> {
    match out {
        Some(dir) => report.write(dir),
        None => {
            print!("{}", report.to_string_pretty());
            Ok(())
        }
    }
}

fn fit(command: &str, args: &FitArgs, kinds: &[SweepKind], count: Option<usize>) -> Result<()> {
    let opts = options(args.tolerance)?;
    if let Some(n) = count {
        if args.manifests.len() != n {
            return Err(CliError::Validation(format!(
                "{command} takes {n} manifest(s), got {}",
                args.manifests.len()
            )));
        }
    }
    let manifests = pipeline::load_manifests(&args.manifests, Some(kinds))?;
    let report = pipeline::analyze(command, manifests, &opts)?;
    emit(&report, args.out.as_deref())
}

fn dispatch(command: &Command) -> Result<()> {
    use SweepKind::*;
    match command {
        Command::Design { manifest, out } => {
            emit(&commands::design_report(manifest)?, out.as_deref())
        }
        Command::FitTrace {
            file,
            out,
            tolerance,
        } => {
            let opts = options(*tolerance)?;
            emit(&pipeline::trace_report(file, &opts)?, out.as_deref())
        }
        Command::FitTemp(a) => fit("fit-temp", a, &[Temperature], Some(1)),
        Command::FitPower(a) => fit("fit-power", a, &[Power], Some(1)),
        Command::FitCombined(a) => {
            let manifests = pipeline::load_manifests(&a.manifests, Some(&[Temperature, Power]))?;
            let has = |k| manifests.iter().filter(|m| m.kind == k).count() == 1;
            if manifests.len() != 2 || !has(Temperature) || !has(Power) {
                return Err(CliError::Validation(
                    "fit-combined takes one temperature and one power manifest".into(),
                ));
            }
            let report = pipeline::analyze("fit-combined", manifests, &options(a.tolerance)?)?;
            emit(&report, a.out.as_deref())
        }
        Command::FitField(a) => fit("fit-field", a, &[Field], None),
        Command::Synth {
            manifest,
            out,
            seed,
        } => commands::synth(manifest, *seed)?.write(out),
        Command::Report(a) => fit("report", a, &[Temperature, Power, Field], None),
    }
}

/// Runs a parsed command line on a pool of `cli.threads` workers.
pub fn run(cli: &Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start {} threads: {e}", cli.threads)))?;
    pool.install(|| dispatch(&cli.command))
}
