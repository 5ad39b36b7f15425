//! `iphoton`: simulate, reconstruct, characterize and report.

mod characterize;
mod config;
mod error;
mod manifest;
mod reconstruct;
mod report;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{RunConfig, TraceFormat};
use crate::error::CliResult;
use crate::manifest::Run;

#[derive(Parser)]
#[command(name = "iphoton", version, about = "Itinerant single-photon state tomography pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// JPA gain in dB, overriding the configuration.
    #[arg(long)]
    gain_db: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic traces or characterization tables.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: simulate::SimulateKind,
        /// Trials per set.
        #[arg(long)]
        trials: Option<usize>,
        /// Number of sets.
        #[arg(long)]
        sets: Option<usize>,
        #[arg(long, value_enum)]
        format: Option<TraceFormatArg>,
    },
    /// Extract quadratures and reconstruct the photon-number distribution.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Photon trace files; default: photon_set*.{iptrc,csv} in the output directory.
        #[arg(long, num_args = 1..)]
        photon: Vec<PathBuf>,
        /// Control trace files, paired with the photon files in order.
        #[arg(long, num_args = 1..)]
        control: Vec<PathBuf>,
        /// Optimize the mode function on a held-out pair first.
        #[arg(long, requires_all = ["held_out_photon", "held_out_control"])]
        mode_optimize: bool,
        #[arg(long)]
        held_out_photon: Option<PathBuf>,
        #[arg(long)]
        held_out_control: Option<PathBuf>,
        /// Also write mode, window and population tables.
        #[arg(long)]
        emit_plots: bool,
    },
    /// Fit dephasing and thermal-sweep tables.
    Characterize {
        #[command(flatten)]
        common: Common,
    },
    /// Compare reconstructions with the characterized chain.
    Report {
        #[command(flatten)]
        common: Common,
        /// Directories holding a reconstruction each; default: the output directory.
        #[arg(long, num_args = 1..)]
        runs: Vec<PathBuf>,
        /// Characterization file; default: characterization.json in the output directory.
        #[arg(long)]
        characterization: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum TraceFormatArg {
    Binary,
    Csv,
}

fn resolve(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(g) = common.gain_db {
        cfg.chain.g_jpa_db = g;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { common, kind, trials, sets, format } => {
            let mut cfg = resolve(&common)?;
            if let Some(t) = trials {
                cfg.tomography.trials_per_set = t;
            }
            if let Some(s) = sets {
                cfg.tomography.n_sets = s;
            }
            if let Some(f) = format {
                cfg.tomography.trace_format = match f {
                    TraceFormatArg::Binary => TraceFormat::Binary,
                    TraceFormatArg::Csv => TraceFormat::Csv,
                };
            }
            simulate::run(Run::start(&format!("simulate-{}", kind.as_str()), cfg)?, kind)
        }
        Command::Reconstruct { common, photon, control, mode_optimize, held_out_photon, held_out_control, emit_plots } => {
            let cfg = resolve(&common)?;
            let args = reconstruct::ReconstructArgs {
                photon,
                control,
                mode_optimize,
                held_out_photon,
                held_out_control,
                emit_plots,
            };
            reconstruct::run(Run::start("reconstruct", cfg)?, args)
        }
        Command::Characterize { common } => characterize::run(Run::start("characterize", resolve(&common)?)?),
        Command::Report { common, runs, characterization } => {
            let cfg = resolve(&common)?;
            report::run(Run::start("report", cfg)?, report::ReportArgs { runs, characterization })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("iphoton: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
