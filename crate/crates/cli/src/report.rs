use std::path::{Path, PathBuf};

use iphoton_core::characterization::{compare_to_expectation, nbar_err_from_gain, nbar_from_gain, ExpectationComparison};
use iphoton_core::io::Table;
use iphoton_core::tomography::G2Summary;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::characterize::{CharacterizationReport, CurvePoint, CHARACTERIZATION_FILE};
use crate::error::{CliError, CliResult};
use crate::manifest::{require, Run};
use crate::reconstruct::{ReconstructionReport, RECONSTRUCTION_FILE};

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Default)]
pub struct ReportArgs {
    /// Directories holding one reconstruction each; empty means the output
    /// directory.
    pub runs: Vec<PathBuf>,
    pub characterization: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainEntry {
    pub run: String,
    pub gain_db: f64,
    pub nbar_backaction: f64,
    pub nbar_backaction_err: f64,
    pub comparison: ExpectationComparison,
    pub stat_err: Vec<f64>,
    pub sys_lo: Vec<f64>,
    pub sys_hi: Vec<f64>,
    pub g2: Option<G2Summary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    pub escape_probability: f64,
    pub notes: Vec<String>,
    pub curve: Vec<CurvePoint>,
    pub per_gain: Vec<GainEntry>,
    /// Gain with the highest single-photon fidelity.
    pub best_gain_db: Option<f64>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn run(mut run: Run, args: ReportArgs) -> CliResult<()> {
    let cfg = run.config.clone();
    let char_path = args.characterization.clone().unwrap_or_else(|| run.path(CHARACTERIZATION_FILE));
    let runs = if args.runs.is_empty() { vec![run.dir.clone()] } else { args.runs.clone() };
    let rec_paths: Vec<PathBuf> = runs.iter().map(|d| d.join(RECONSTRUCTION_FILE)).collect();
    let mut needed: Vec<(&str, &Path)> = vec![("characterization", &char_path)];
    needed.extend(rec_paths.iter().map(|p| ("reconstruction", p.as_path())));
    require(&needed)?;

    let characterization: CharacterizationReport = read_json(&char_path)?;
    let mut per_gain = Vec::with_capacity(rec_paths.len());
    for (dir, path) in runs.iter().zip(&rec_paths) {
        let rec: ReconstructionReport = read_json(path)?;
        let comparison = compare_to_expectation(
            &rec.result,
            cfg.protocol.kappa,
            cfg.protocol.kappa_out,
            &characterization.efficiency,
            rec.gain_db,
        )
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let model = &characterization.backaction;
        per_gain.push(GainEntry {
            run: dir.display().to_string(),
            gain_db: rec.gain_db,
            nbar_backaction: nbar_from_gain(model, rec.gain_db)?.value(),
            nbar_backaction_err: nbar_err_from_gain(model, rec.gain_db),
            comparison,
            stat_err: rec.stat_err,
            sys_lo: rec.sys_lo,
            sys_hi: rec.sys_hi,
            g2: rec.g2,
        });
    }
    per_gain.sort_by(|a, b| a.gain_db.total_cmp(&b.gain_db));
    run.lap("comparison");

    let n_cols = per_gain.iter().map(|e| e.comparison.measured.len()).max().unwrap_or(0);
    let mut columns: Vec<String> = vec!["gain_db".into(), "eta".into(), "nbar".into()];
    columns.extend((0..n_cols).map(|n| format!("rho_{n}{n}")));
    columns.extend(
        ["f_single_photon", "f_single_photon_stat", "f_expected", "f_expected_stat", "f_expected_sys_lo", "f_expected_sys_hi", "g2"]
            .map(String::from),
    );
    let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = Table::new(&refs);
    for e in &per_gain {
        let c = &e.comparison;
        let mut row = vec![e.gain_db, c.eta, e.nbar_backaction];
        row.extend((0..n_cols).map(|n| c.measured.get(n).copied().unwrap_or(0.0)));
        row.extend([
            c.fidelity_ideal.value,
            c.fidelity_ideal.stat_err,
            c.fidelity_expected.value,
            c.fidelity_expected.stat_err,
            c.fidelity_expected.sys_lo,
            c.fidelity_expected.sys_hi,
            e.g2.map_or(f64::NAN, |g| g.central),
        ]);
        table.push(row);
    }
    run.write_table("report.csv", &table)?;

    for e in &per_gain {
        let c = &e.comparison;
        println!(
            "{:>5.1} dB: F(1) = {:.3} +/- {:.3}, F(expected) = {:.3} +/- {:.3} [{:.3}, {:.3}]{}",
            e.gain_db,
            c.fidelity_ideal.value,
            c.fidelity_ideal.stat_err,
            c.fidelity_expected.value,
            c.fidelity_expected.stat_err,
            c.fidelity_expected.sys_lo,
            c.fidelity_expected.sys_hi,
            if c.consistent_with_unity { "" } else { "  (inconsistent with unity)" }
        );
    }

    let best_gain_db = per_gain
        .iter()
        .max_by(|a, b| a.comparison.fidelity_ideal.value.total_cmp(&b.comparison.fidelity_ideal.value))
        .map(|e| e.gain_db);
    let report = Report {
        config_hash: cfg.hash()?,
        escape_probability: cfg.protocol.kappa_out / cfg.protocol.kappa,
        notes: crate::manifest::standing_notes(&cfg),
        curve: characterization.curve,
        per_gain,
        best_gain_db,
    };
    run.write_json(REPORT_FILE, &report)?;
    run.lap("output");
    run.set_details(json!({ "gains_db": report.per_gain.iter().map(|e| e.gain_db).collect::<Vec<_>>() }));
    run.finish()?;
    Ok(())
}
