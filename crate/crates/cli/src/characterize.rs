use iphoton_core::characterization::{
    efficiency_curve, fit_added_noise_model, fit_dephasing, fit_thermal_sweep, nbar_err_from_gain, nbar_from_gain,
    AddedNoiseModel, BackactionModel, EfficiencyCurve,
};
use iphoton_core::io::{dephasing_points, sweep_points, Table};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::manifest::{require, Run};
use crate::simulate::{DEPHASING_FILE, SWEEP_FILE};

pub const CHARACTERIZATION_FILE: &str = "characterization.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub gain_db: f64,
    pub eta: f64,
    pub eta_err: f64,
    pub nbar: f64,
    pub nbar_err: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub config_hash: String,
    pub backaction: BackactionModel,
    pub added_noise: AddedNoiseModel,
    pub efficiency: EfficiencyCurve,
    pub curve: Vec<CurvePoint>,
}

fn read_table(path: &std::path::Path) -> CliResult<Table> {
    Table::read_file(path).map_err(|e| match e {
        iphoton_core::Error::Io(m) => CliError::io(path, m),
        other => CliError::Data(format!("{}: {other}", path.display())),
    })
}

pub fn run(mut run: Run) -> CliResult<()> {
    let cfg = run.config.clone();
    let dephasing_path = run.path(DEPHASING_FILE);
    let sweep_path = run.path(SWEEP_FILE);
    require(&[("dephasing data", &dephasing_path), ("thermal sweep", &sweep_path)])?;

    let dephasing = dephasing_points(&read_table(&dephasing_path)?)?;
    let sweep = sweep_points(&read_table(&sweep_path)?)?;
    run.lap("load");

    let backaction = fit_dephasing(&dephasing, cfg.protocol.kappa)?;
    let per_gain = fit_thermal_sweep(&sweep)?;
    let added_noise = fit_added_noise_model(&per_gain)?;
    let efficiency = efficiency_curve(&added_noise, &cfg.characterization.curve_gains_db)?;
    run.lap("fits");

    let curve = efficiency
        .points
        .iter()
        .map(|p| {
            Ok(CurvePoint {
                gain_db: p.gain_db,
                eta: p.eta,
                eta_err: p.eta_err,
                nbar: nbar_from_gain(&backaction, p.gain_db)?.value(),
                nbar_err: nbar_err_from_gain(&backaction, p.gain_db),
            })
        })
        .collect::<iphoton_core::Result<Vec<_>>>()?;

    let mut res = Table::new(&["gain_db", "gamma_over_2pi_khz", "model_over_2pi_khz", "residual_over_2pi_khz", "normalized_residual"]);
    for (g, y, m, r) in backaction.residuals(&dephasing) {
        let err = dephasing.iter().find(|d| d.gain_db == g).map(|d| d.gamma_err).unwrap_or(0.0);
        res.push(vec![g, y, m, r, if err > 0.0 { r / err } else { f64::NAN }]);
    }
    run.write_table("dephasing_residuals.csv", &res)?;

    let mut sres = Table::new(&["gain_db", "temperature_mk", "s_in_quanta", "s_out_quanta", "model_quanta", "residual_quanta"]);
    for fit in &added_noise.per_gain {
        for &(t, s_in, s_out, m, r) in &fit.residuals {
            sres.push(vec![fit.gain_db, t, s_in, s_out, m, r]);
        }
    }
    run.write_table("sweep_residuals.csv", &sres)?;

    let mut table = Table::new(&["gain_db", "eta", "eta_err", "nbar", "nbar_err"]);
    for c in &curve {
        table.push(vec![c.gain_db, c.eta, c.eta_err, c.nbar, c.nbar_err]);
    }
    run.write_table("efficiency_curve.csv", &table)?;

    if added_noise.below_phase_insensitive_limit() {
        run.note(format!(
            "fitted n_jpa = {:.3} lies below the phase-insensitive limit of 1/4",
            added_noise.n_jpa
        ));
    }
    println!(
        "isolation L = {:.3e} +/- {:.1e}, Gamma0/2pi = {:.2} +/- {:.2} kHz",
        backaction.isolation_l,
        backaction.isolation_err(),
        backaction.gamma0,
        backaction.gamma0_err()
    );
    println!(
        "n_jpa = {:.3} +/- {:.3}, n_hemt = {:.2} +/- {:.2}",
        added_noise.n_jpa,
        added_noise.covariance[0][0].sqrt(),
        added_noise.n_hemt,
        added_noise.covariance[1][1].sqrt()
    );

    let report = CharacterizationReport {
        config_hash: cfg.hash()?,
        backaction,
        added_noise,
        efficiency,
        curve,
    };
    run.write_json(CHARACTERIZATION_FILE, &report)?;
    run.lap("output");
    run.set_details(json!({
        "isolation_l": report.backaction.isolation_l,
        "gamma0": report.backaction.gamma0,
        "n_jpa": report.added_noise.n_jpa,
        "n_hemt": report.added_noise.n_hemt,
    }));
    run.finish()?;
    Ok(())
}
