use std::path::{Path, PathBuf};

use iphoton_core::fock::ThermalOccupation;
use iphoton_core::io::{histogram_table, read_traces, waveform_table, Table, TraceMatrix};
use iphoton_core::simulator::TrialKind;
use iphoton_core::temporal_mode::{
    background_window, mode_shape_with, optimize_mode, OptimizeOptions, QuadratureExtractor, TemporalModeParams,
    TraceGrid,
};
use iphoton_core::tomography::{
    g2_summary, reconstruct_with_errors, G2Summary, Histogram, QuadratureDataset, ReconstructionOptions,
    ReconstructionResult,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::manifest::Run;

pub const RECONSTRUCTION_FILE: &str = "reconstruction.json";
pub const HISTOGRAM_FILE: &str = "histogram.csv";

#[derive(Debug, Clone, Default)]
pub struct ReconstructArgs {
    pub photon: Vec<PathBuf>,
    pub control: Vec<PathBuf>,
    pub mode_optimize: bool,
    pub held_out_photon: Option<PathBuf>,
    pub held_out_control: Option<PathBuf>,
    pub emit_plots: bool,
}

/// Everything a later report needs from one reconstruction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub gain_db: f64,
    pub config_hash: String,
    pub mode: TemporalModeParams,
    pub mode_optimized: bool,
    pub nbar_backaction: f64,
    pub photon_files: Vec<String>,
    pub control_files: Vec<String>,
    /// Retained trials per set, photon then control.
    pub trials_per_set: Vec<(usize, usize)>,
    pub populations: Vec<f64>,
    pub stat_err: Vec<f64>,
    pub sys_lo: Vec<f64>,
    pub sys_hi: Vec<f64>,
    /// `sqrt(rho_11)` of the central reconstruction.
    pub fidelity_single_photon: f64,
    /// Absent when `rho_11` vanishes.
    pub g2: Option<G2Summary>,
    pub result: ReconstructionResult,
}

/// Trace files of one kind in `dir`, ordered by set index.
pub fn discover(dir: &Path, kind: TrialKind) -> CliResult<Vec<PathBuf>> {
    let prefix = format!("{}_set", kind.as_str());
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(CliError::io(dir, e)),
    };
    let mut found = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(rest) = name.strip_prefix(&prefix) else { continue };
        let Some((index, ext)) = rest.split_once('.') else { continue };
        if !matches!(ext, "iptrc" | "csv") {
            continue;
        }
        if let Ok(k) = index.parse::<usize>() {
            found.push((k, path));
        }
    }
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

fn load(path: &Path, grid: &TraceGrid) -> CliResult<TraceMatrix> {
    if !path.exists() {
        return Err(CliError::MissingStage(vec![format!("trace file: {}", path.display())]));
    }
    let m = read_traces(path).map_err(|e| match e {
        iphoton_core::Error::Io(m) => CliError::io(path, m),
        other => CliError::Data(format!("{}: {other}", path.display())),
    })?;
    m.check_grid(grid).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(m)
}

fn extract(path: &Path, grid: &TraceGrid, extractor: &QuadratureExtractor) -> CliResult<QuadratureDataset> {
    let m = load(path, grid)?;
    let values = m.rows().map(|r| extractor.extract_samples(r)).collect::<iphoton_core::Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(CliError::Data(format!("{}: no traces", path.display())));
    }
    Ok(QuadratureDataset::uncalibrated(path.display().to_string(), values)?)
}

fn names(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

pub fn run(mut run: Run, mut args: ReconstructArgs) -> CliResult<()> {
    let cfg = run.config.clone();
    if args.photon.is_empty() {
        args.photon = discover(&run.dir, TrialKind::Photon)?;
    }
    if args.control.is_empty() {
        args.control = discover(&run.dir, TrialKind::Control)?;
    }
    let mut missing = Vec::new();
    if args.photon.is_empty() {
        missing.push(format!("photon traces in {}", run.dir.display()));
    }
    if args.control.is_empty() {
        missing.push(format!("control traces in {}", run.dir.display()));
    }
    if !missing.is_empty() {
        return Err(CliError::MissingStage(missing));
    }
    if args.photon.len() != args.control.len() {
        return Err(CliError::Data(format!(
            "cannot pair {} photon files with {} control files",
            args.photon.len(),
            args.control.len()
        )));
    }

    let grid = cfg.protocol.grid;
    let window = background_window(&grid, &cfg.protocol.readout_intervals)?;
    let nbar = match cfg.tomography.nbar_backaction {
        Some(n) => ThermalOccupation::new(n)?,
        None => cfg.chain.backaction(),
    };
    let mut params = cfg.mode_params();
    run.lap("setup");

    if args.mode_optimize {
        let (Some(hp), Some(hc)) = (&args.held_out_photon, &args.held_out_control) else {
            return Err(CliError::Config(
                "--mode-optimize needs --held-out-photon and --held-out-control".into(),
            ));
        };
        let photon = load(hp, &grid)?.to_traces(&grid)?;
        let control = load(hc, &grid)?.to_traces(&grid)?;
        let options = OptimizeOptions {
            shape: cfg.mode.shape,
            n_max: cfg.tomography.n_max,
            nbar_backaction: nbar,
            fit: cfg.tomography.fit,
            ..OptimizeOptions::default()
        };
        let opt = optimize_mode(&photon, &control, &window, &params, &options)?;
        eprintln!(
            "mode optimization: rho00 {:.4} -> {:.4} after {} iterations",
            opt.initial_rho00, opt.rho00, opt.iterations
        );
        let trace: Vec<_> = opt.trace.iter().map(|(p, f)| json!({ "params": p, "rho00": f })).collect();
        run.write_json(
            "mode_optimization.json",
            &json!({
                "initial": params,
                "optimized": opt.params,
                "initial_rho00": opt.initial_rho00,
                "rho00": opt.rho00,
                "iterations": opt.iterations,
                "evaluations": opt.evaluations,
                "trace": trace,
            }),
        )?;
        params = opt.params;
        run.lap("mode optimization");
    }

    let mode = mode_shape_with(&params, &grid, &cfg.mode.shape)?;
    let extractor = QuadratureExtractor::new(&mode, &window)?;
    let photon = args.photon.iter().map(|p| extract(p, &grid, &extractor)).collect::<CliResult<Vec<_>>>()?;
    let control = args.control.iter().map(|p| extract(p, &grid, &extractor)).collect::<CliResult<Vec<_>>>()?;
    run.lap("extraction");

    let options = ReconstructionOptions { n_max: cfg.tomography.n_max, nbar_backaction: nbar, fit: cfg.tomography.fit };
    let result = reconstruct_with_errors(&photon, &control, &options)?;
    run.lap("reconstruction");

    let mut pooled = Vec::new();
    for (p, cal) in photon.iter().zip(&result.squeezed.calibrations) {
        pooled.extend_from_slice(cal.apply(p)?.values());
    }
    let hist = Histogram::freedman_diaconis(&pooled)?;
    run.write_table(HISTOGRAM_FILE, &histogram_table(&hist.with_model(&result.rho)?))?;

    if args.emit_plots {
        run.write_table("mode.csv", &waveform_table(&grid, mode.samples()))?;
        run.write_table("window.csv", &waveform_table(&grid, window.samples()))?;
        let mut pops = Table::new(&["n", "rho_nn", "stat_err", "sys_lo", "sys_hi"]);
        for n in 0..=cfg.tomography.n_max {
            pops.push(vec![n as f64, result.rho.population(n), result.stat_err[n], result.sys_lo[n], result.sys_hi[n]]);
        }
        run.write_table("populations.csv", &pops)?;
    }

    let report = ReconstructionReport {
        gain_db: cfg.chain.g_jpa_db,
        config_hash: cfg.hash()?,
        mode: params,
        mode_optimized: args.mode_optimize,
        nbar_backaction: nbar.value(),
        photon_files: names(&args.photon),
        control_files: names(&args.control),
        trials_per_set: photon.iter().zip(&control).map(|(p, c)| (p.len(), c.len())).collect(),
        populations: result.rho.populations().to_vec(),
        stat_err: result.stat_err.clone(),
        sys_lo: result.sys_lo.clone(),
        sys_hi: result.sys_hi.clone(),
        fidelity_single_photon: result.rho.population(1).sqrt(),
        g2: g2_summary(&result).ok(),
        result,
    };
    run.write_json(RECONSTRUCTION_FILE, &report)?;
    run.lap("output");

    print_populations(&report);
    run.set_details(json!({
        "gain_db": report.gain_db,
        "n_sets": report.result.n_sets,
        "populations": report.populations,
    }));
    run.finish()?;
    Ok(())
}

fn print_populations(r: &ReconstructionReport) {
    println!("gain {} dB, {} sets", r.gain_db, r.result.n_sets);
    for (n, p) in r.populations.iter().enumerate() {
        println!(
            "  rho_{n}{n} = {p:.4} +/- {:.4}  [{:.4}, {:.4}]",
            r.stat_err[n], r.sys_lo[n], r.sys_hi[n]
        );
    }
    if let Some(g) = &r.g2 {
        println!("  g2(0) = {:.3} +/- {:.3}", g.central, g.stat_err);
    }
}
