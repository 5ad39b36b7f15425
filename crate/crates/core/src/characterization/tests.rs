use super::*;
use crate::fock::DiagonalDensityMatrix;
use crate::simulator::{simulate_dephasing_data, simulate_thermal_sweep, ChainConfig};
use crate::tomography::{AssumptionFits, CalibrationAssumption};

fn dephasing_gains() -> Vec<f64> {
    (0..9).map(|k| 17.0 + 2.0 * k as f64).collect()
}

#[test]
fn planck_examples() {
    let x = PLANCK * 5.8e9 / (BOLTZMANN * 0.079);
    assert!((x - 3.524).abs() < 1e-3, "{x}");
    assert!((planck_occupation(79.0, 5.8).unwrap() - 0.530).abs() < 5e-4);
    assert!((planck_occupation(1.0, 5.8).unwrap() - 0.5).abs() < 1e-12);
    // the hot end of the sweep sits at 3.26 quanta
    assert!((planck_occupation(900.0, 5.8).unwrap() - 3.259).abs() < 1e-3);
    // Rayleigh–Jeans: S_in - kT/hf -> 0 as T grows
    let t = 1e6;
    let rj = BOLTZMANN * t * 1e-3 / (PLANCK * 5.8e9);
    assert!((planck_occupation(t, 5.8).unwrap() - rj).abs() / rj < 1e-6);
    assert!(planck_occupation(0.0, 5.8).is_err());
}

#[test]
fn nbar_examples() {
    let m = BackactionModel::new(2.1e-4, 40.0, 410.0).unwrap();
    assert_eq!(nbar_from_gain(&m, 0.0).unwrap().value(), 0.0);
    let n = nbar_from_gain(&m, 29.0).unwrap().value();
    assert!((n - 0.0417).abs() < 1e-4);
    let m2 = BackactionModel::new(4.2e-4, 40.0, 410.0).unwrap();
    assert!((nbar_from_gain(&m2, 29.0).unwrap().value() - 2.0 * n).abs() < 1e-15);
    assert!(nbar_from_gain(&m, -1.0).is_err());
    assert!((m.gamma(29.0) - 75.6).abs() < 0.1);
}

#[test]
fn dephasing_fit_noiseless_recovery() {
    let data = simulate_dephasing_data(&dephasing_gains(), 2.1e-4, 40.0, 410.0, 0.0, 0).unwrap();
    let fit = fit_dephasing(&data, 410.0).unwrap();
    assert!((fit.isolation_l / 2.1e-4 - 1.0).abs() < 1e-8);
    assert!((fit.gamma0 / 40.0 - 1.0).abs() < 1e-8);
    assert!(fit.residuals(&data).iter().all(|r| r.3.abs() < 1e-9));
}

#[test]
fn dephasing_fit_on_flat_data() {
    let data = simulate_dephasing_data(&dephasing_gains(), 0.0, 40.0, 410.0, 0.0, 0).unwrap();
    let fit = fit_dephasing(&data, 410.0).unwrap();
    assert!(fit.isolation_l.abs() < 1e-12);
    assert!((fit.gamma0 - 40.0).abs() < 1e-9);
}

#[test]
fn dephasing_fit_is_scale_covariant() {
    let data = simulate_dephasing_data(&dephasing_gains(), 2.1e-4, 40.0, 410.0, 0.05, 3).unwrap();
    let fit = fit_dephasing(&data, 410.0).unwrap();
    let c = 6.283185307179586;
    let scaled: Vec<DephasingPoint> = data
        .iter()
        .map(|p| DephasingPoint { gain_db: p.gain_db, gamma: c * p.gamma, gamma_err: c * p.gamma_err })
        .collect();
    let fit2 = fit_dephasing(&scaled, c * 410.0).unwrap();
    assert!((fit2.isolation_l / fit.isolation_l - 1.0).abs() < 1e-9);
    assert!((fit2.gamma0 / (c * fit.gamma0) - 1.0).abs() < 1e-9);
}

#[test]
fn dephasing_fit_needs_three_points() {
    let data = simulate_dephasing_data(&[20.0, 30.0], 2.1e-4, 40.0, 410.0, 0.0, 0).unwrap();
    assert!(matches!(fit_dephasing(&data, 410.0), Err(Error::Underdetermined(_))));
}

#[test]
fn dephasing_fit_unit_weights_use_residual_scale() {
    let mut data = simulate_dephasing_data(&dephasing_gains(), 2.1e-4, 40.0, 410.0, 0.03, 8).unwrap();
    data.iter_mut().for_each(|p| p.gamma_err = 0.0);
    let fit = fit_dephasing(&data, 410.0).unwrap();
    assert!(fit.isolation_err() > 0.0 && fit.gamma0_err() > 0.0);
    assert!((fit.isolation_l / 2.1e-4 - 1.0).abs() < 0.2);
}

fn line(gain_db: f64, g: f64, n_add: f64) -> Vec<SweepPoint> {
    [79.0, 200.0, 400.0, 900.0]
        .iter()
        .map(|&t| {
            let s = planck_occupation(t, 5.8).unwrap();
            SweepPoint { gain_db, temperature_mk: t, s_in: s, s_out: g * (s + n_add), s_out_err: 0.0 }
        })
        .collect()
}

#[test]
fn thermal_sweep_exact_line() {
    let fits = fit_thermal_sweep(&line(20.0, 100.0, 0.5)).unwrap();
    assert_eq!(fits.len(), 1);
    assert!((fits[0].chain_gain - 100.0).abs() < 1e-10);
    assert!((fits[0].n_add - 0.5).abs() < 1e-12);
    assert!(fits[0].residuals.iter().all(|r| r.4.abs() < 1e-11));
}

#[test]
fn thermal_sweep_noiseless_residuals_vanish() {
    let chain = ChainConfig::default();
    let pts = simulate_thermal_sweep(&[79.0, 150.0, 300.0, 600.0, 900.0], &[20.0, 25.0, 30.0], &chain, 0.0, 0).unwrap();
    for f in fit_thermal_sweep(&pts).unwrap() {
        let scale = f.residuals.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
        assert!(f.residuals.iter().all(|r| r.4.abs() <= 1e-13 * scale), "{:?}", f.residuals);
        let g = 10f64.powf(f.gain_db / 10.0);
        assert!((f.n_add - (0.39 + 18.0 / g)).abs() < 1e-12);
    }
}

#[test]
fn thermal_sweep_noise_is_gain_invariant() {
    let chain = ChainConfig::default();
    let pts = simulate_thermal_sweep(&[79.0, 300.0, 900.0], &[25.0], &chain, 0.02, 5).unwrap();
    let scaled: Vec<SweepPoint> =
        pts.iter().map(|p| SweepPoint { s_out: 7.0 * p.s_out, s_out_err: 7.0 * p.s_out_err, ..*p }).collect();
    let a = &fit_thermal_sweep(&pts).unwrap()[0];
    let b = &fit_thermal_sweep(&scaled).unwrap()[0];
    assert!((a.n_add - b.n_add).abs() < 1e-12 * a.n_add.abs().max(1.0));
    assert!((b.chain_gain / a.chain_gain - 7.0).abs() < 1e-12);
}

#[test]
fn thermal_sweep_errors() {
    let mut pts = line(20.0, 100.0, 0.5);
    pts.truncate(2);
    assert!(matches!(fit_thermal_sweep(&pts), Err(Error::Underdetermined(_))));
    let flat: Vec<SweepPoint> = line(20.0, 100.0, 0.5).into_iter().map(|p| SweepPoint { s_in: 0.6, ..p }).collect();
    assert!(matches!(fit_thermal_sweep(&flat), Err(Error::Conditioning(_))));
}

#[test]
fn added_noise_model_exact_recovery() {
    let per_gain: Vec<GainFit> = [20.0, 25.0, 30.0]
        .iter()
        .map(|&g| {
            let n = 0.39 + 18.0 / 10f64.powf(g / 10.0);
            fit_thermal_sweep(&line(g, 10f64.powf(g / 10.0), n)).unwrap().remove(0)
        })
        .collect();
    let m = fit_added_noise_model(&per_gain).unwrap();
    assert!((m.n_jpa - 0.39).abs() < 1e-10 && (m.n_hemt - 18.0).abs() < 1e-8, "{m:?}");
    assert!((m.n_add(200.0) - m.n_jpa).abs() < 1e-15);
    assert!(!m.below_phase_insensitive_limit());
    assert!(matches!(fit_added_noise_model(&per_gain[..1]), Err(Error::Underdetermined(_))));
}

#[test]
fn efficiency_examples() {
    assert_eq!(efficiency_from_added_noise(0.0).unwrap(), 1.0);
    assert_eq!(efficiency_from_added_noise(0.5).unwrap(), 0.5);
    assert!(efficiency_from_added_noise(-0.1).is_err());
    let model = AddedNoiseModel::new(0.39, 18.0);
    assert!((model.n_add(29.0) - 0.4127).abs() < 1e-4);
    let curve = efficiency_curve(&model, &dephasing_gains()).unwrap();
    assert!((curve.at(29.0).unwrap().eta - 0.548).abs() < 1e-3);
    assert!(curve.points.windows(2).all(|w| w[1].eta >= w[0].eta));
    assert!(curve.at(35.0).is_err());
    assert_eq!(curve.at(29.0).unwrap().eta_err, 0.0);
}

#[test]
fn efficiency_band_propagates_model_covariance() {
    let mut model = AddedNoiseModel::new(0.39, 18.0);
    model.covariance = [[0.03f64.powi(2), 0.0], [0.0, 5.0f64.powi(2)]];
    let p = efficiency_curve(&model, &[29.0]).unwrap().points[0];
    let sd_n = (0.03f64.powi(2) + (5.0 / 10f64.powf(2.9)).powi(2)).sqrt();
    assert!((p.eta_err - 2.0 * p.eta * p.eta * sd_n).abs() < 1e-15);
    // finite-difference check of the derivative
    let h = 1e-6;
    let d = (efficiency_from_added_noise(0.4127 + h).unwrap() - efficiency_from_added_noise(0.4127 - h).unwrap()) / (2.0 * h);
    let eta = efficiency_from_added_noise(0.4127).unwrap();
    assert!((d + 2.0 * eta * eta).abs() < 1e-8);
}

fn result_from(sets: Vec<DiagonalDensityMatrix>, amplified: DiagonalDensityMatrix) -> ReconstructionResult {
    let n = sets[0].n_max() + 1;
    let mean: Vec<f64> = (0..n).map(|i| sets.iter().map(|r| r.population(i)).sum::<f64>() / sets.len() as f64).collect();
    let mean = DiagonalDensityMatrix::from_weights(&mean).unwrap();
    let fits = |assumption, mean: DiagonalDensityMatrix, per_set| AssumptionFits {
        assumption,
        calibrations: Vec::new(),
        per_set,
        mean,
    };
    ReconstructionResult {
        rho: mean.clone(),
        stat_err: vec![0.0; n],
        sys_lo: mean.populations().to_vec(),
        sys_hi: mean.populations().to_vec(),
        n_sets: sets.len(),
        squeezed: fits(CalibrationAssumption::Squeezed, mean, sets.clone()),
        amplified: fits(CalibrationAssumption::Amplified, amplified, sets),
    }
}

#[test]
fn comparison_with_matching_state_has_unit_fidelity() {
    let curve = efficiency_curve(&AddedNoiseModel::new(0.39, 18.0), &dephasing_gains()).unwrap();
    let eta = curve.at(29.0).unwrap().eta;
    let exp = expected_measured_state(410.0, 300.0, eta).unwrap().resized(3);
    let r = result_from(vec![exp.clone(), exp.clone()], exp.clone());
    let c = compare_to_expectation(&r, 410.0, 300.0, &curve, 29.0).unwrap();
    assert!((c.fidelity_expected.value - 1.0).abs() < 1e-12);
    assert!(c.consistent_with_unity);
    assert!((c.fidelity_ideal.value - exp.population(1).sqrt()).abs() < 1e-15);
    assert!((c.escape_probability - 0.7317).abs() < 1e-4);
}

#[test]
fn comparison_reports_both_bands() {
    let curve = efficiency_curve(&AddedNoiseModel::new(0.39, 18.0), &dephasing_gains()).unwrap();
    let a = DiagonalDensityMatrix::new(vec![0.62, 0.36, 0.02, 0.0]).unwrap();
    let b = DiagonalDensityMatrix::new(vec![0.60, 0.37, 0.03, 0.0]).unwrap();
    let amp = DiagonalDensityMatrix::new(vec![0.64, 0.34, 0.02, 0.0]).unwrap();
    let r = result_from(vec![a, b], amp);
    let c = compare_to_expectation(&r, 410.0, 300.0, &curve, 29.0).unwrap();
    let f = c.fidelity_expected;
    assert!(f.stat_err > 0.0);
    assert!(f.sys_lo <= f.value && f.value <= f.sys_hi && f.sys_lo < f.sys_hi);
    assert!((c.fidelity_ideal.value - 0.365f64.sqrt()).abs() < 1e-12);
    assert!(compare_to_expectation(&r, 410.0, 300.0, &curve, 40.0).is_err());
}
