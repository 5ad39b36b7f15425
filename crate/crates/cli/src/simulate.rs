use std::fs::File;
use std::io::BufWriter;

use iphoton_core::io::{dephasing_table, sweep_table, BinaryTraceWriter, CsvTraceWriter, Table};
use iphoton_core::pipeline::set_seed;
use iphoton_core::simulator::{
    simulate_dephasing_data, simulate_thermal_sweep, PostSelectionTally, TrialKind, TrialSimulator,
};
use serde_json::json;

use crate::config::TraceFormat;
use crate::error::{CliError, CliResult};
use crate::manifest::Run;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SimulateKind {
    Photon,
    Control,
    ThermalSweep,
    Dephasing,
}

impl SimulateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Photon => "photon",
            Self::Control => "control",
            Self::ThermalSweep => "thermal-sweep",
            Self::Dephasing => "dephasing",
        }
    }
}

pub const SWEEP_FILE: &str = "thermal_sweep.csv";
pub const DEPHASING_FILE: &str = "dephasing.csv";

const TRIAL_COLUMNS: [&str; 8] = [
    "trial",
    "retained",
    "initial_excited",
    "pulse_failed",
    "qubit_decayed",
    "backaction_photons",
    "emitted_n",
    "quadrature_truth",
];

pub fn trace_file(kind: TrialKind, set: usize, format: TraceFormat) -> String {
    format!("{}_set{set}.{}", kind.as_str(), format.extension())
}

enum TraceSink {
    Binary(BinaryTraceWriter<BufWriter<File>>),
    Csv(CsvTraceWriter<BufWriter<File>>),
}

impl TraceSink {
    fn push(&mut self, samples: &[f64]) -> iphoton_core::Result<()> {
        match self {
            Self::Binary(w) => w.push(samples),
            Self::Csv(w) => w.push(samples),
        }
    }

    fn finish(self) -> iphoton_core::Result<()> {
        match self {
            Self::Binary(w) => w.finish().map(|_| ()),
            Self::Csv(w) => w.finish(),
        }
    }
}

pub fn run(mut run: Run, kind: SimulateKind) -> CliResult<()> {
    match kind {
        SimulateKind::Photon => traces(&mut run, TrialKind::Photon)?,
        SimulateKind::Control => traces(&mut run, TrialKind::Control)?,
        SimulateKind::ThermalSweep => thermal_sweep(&mut run)?,
        SimulateKind::Dephasing => dephasing(&mut run)?,
    }
    run.finish()?;
    Ok(())
}

fn traces(run: &mut Run, kind: TrialKind) -> CliResult<()> {
    let cfg = run.config.clone();
    let sim = TrialSimulator::with_shape(&cfg.protocol, &cfg.chain, &cfg.mode.shape)?;
    let grid = cfg.protocol.grid;
    let format = cfg.tomography.trace_format;
    run.lap("setup");

    let mut tallies = Vec::with_capacity(cfg.tomography.n_sets);
    for k in 0..cfg.tomography.n_sets {
        let name = trace_file(kind, k, format);
        let path = run.path(&name);
        let file = BufWriter::new(File::create(&path).map_err(|e| CliError::io(&path, e))?);
        let mut sink = match format {
            TraceFormat::Binary => TraceSink::Binary(BinaryTraceWriter::new(file, grid.dt, grid.n_samples)?),
            TraceFormat::Csv => TraceSink::Csv(CsvTraceWriter::new(file, grid.dt, grid.n_samples)?),
        };
        let mut labels = Table::new(&TRIAL_COLUMNS);
        let mut index = 0usize;
        let tally = sim.simulate_stream(kind, cfg.tomography.trials_per_set, set_seed(cfg.seed, k), |r| {
            let t = r.truth;
            labels.push(vec![
                index as f64,
                r.retained() as u8 as f64,
                t.initial_excited as u8 as f64,
                t.pulse_failed as u8 as f64,
                t.qubit_decayed as u8 as f64,
                t.backaction_photons as f64,
                t.emitted_n as f64,
                t.quadrature,
            ]);
            index += 1;
            if r.retained() {
                sink.push(&r.trace.samples)?;
            }
            Ok(())
        })?;
        sink.finish()?;
        run.record_file(&name);
        run.write_table(&format!("{}_set{k}_trials.csv", kind.as_str()), &labels)?;
        print_tally(kind, k, &tally);
        tallies.push(tally);
        run.lap(&format!("set {k}"));
    }

    if tallies.iter().all(|t| t.retained == 0) {
        return Err(CliError::Data("no trials survived post-selection in any set".into()));
    }
    run.set_details(json!({
        "kind": kind.as_str(),
        "gain_db": cfg.chain.g_jpa_db,
        "n_sets": cfg.tomography.n_sets,
        "trials_per_set": cfg.tomography.trials_per_set,
        "analytic_retention": sim.analytic_retention(kind),
        "tallies": tallies,
    }));
    Ok(())
}

fn print_tally(kind: TrialKind, set: usize, t: &PostSelectionTally) {
    println!(
        "{} set {set}: {} of {} retained ({:.1}%); rejected {} initially excited, {} pulse failures, {} qubit decays",
        kind.as_str(),
        t.retained,
        t.total,
        100.0 * t.retained_fraction(),
        t.rejected_initial_excited,
        t.rejected_pulse_failure,
        t.rejected_qubit_decay
    );
}

fn thermal_sweep(run: &mut Run) -> CliResult<()> {
    let cfg = run.config.clone();
    let c = &cfg.characterization;
    let points = simulate_thermal_sweep(&c.sweep_temperatures_mk, &c.sweep_gains_db, &cfg.chain, c.sweep_scatter, cfg.seed)?;
    run.write_table(SWEEP_FILE, &sweep_table(&points))?;
    run.lap("thermal sweep");
    println!("thermal sweep: {} points at {} gains", points.len(), c.sweep_gains_db.len());
    run.set_details(json!({ "points": points.len(), "gains_db": c.sweep_gains_db }));
    Ok(())
}

fn dephasing(run: &mut Run) -> CliResult<()> {
    let cfg = run.config.clone();
    let c = &cfg.characterization;
    let points = simulate_dephasing_data(
        &c.dephasing_gains_db,
        cfg.chain.isolation_l,
        c.gamma0,
        cfg.protocol.kappa,
        c.dephasing_scatter,
        cfg.seed,
    )?;
    run.write_table(DEPHASING_FILE, &dephasing_table(&points))?;
    run.lap("dephasing");
    println!("dephasing: {} points", points.len());
    run.set_details(json!({ "points": points.len(), "gains_db": c.dephasing_gains_db }));
    Ok(())
}
