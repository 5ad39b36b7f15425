use iphoton_core::characterization::{
    dephasing_rate, efficiency_curve, fit_added_noise_model, fit_dephasing, fit_thermal_sweep, nbar_err_from_gain,
    nbar_from_gain,
    AddedNoiseModel, BackactionModel,
};
use iphoton_core::simulator::{simulate_dephasing_data, simulate_thermal_sweep, ChainConfig, DephasingPoint};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use rayon::prelude::*;

fn config(cases: u32) -> Config {
    Config { cases, rng_seed: RngSeed::Fixed(0xc4a7), failure_persistence: None, ..Config::default() }
}

fn dephasing_gains() -> Vec<f64> {
    (0..9).map(|k| 17.0 + 2.0 * k as f64).collect()
}

fn sweep_temperatures() -> Vec<f64> {
    (0..20).map(|k| 79.0 + (900.0 - 79.0) * k as f64 / 19.0).collect()
}

proptest! {
    #![proptest_config(config(128))]

    #[test]
    fn backaction_and_efficiency_grow_with_gain(
        l in 0.0..1e-3f64,
        n_jpa in 0.0..1.0f64,
        n_hemt in 0.0..50.0f64,
        g1 in 0.0..40.0f64,
        g2 in 0.0..40.0f64,
    ) {
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let model = BackactionModel::new(l, 40.0, 410.0).unwrap();
        prop_assert!(nbar_from_gain(&model, lo).unwrap().value() <= nbar_from_gain(&model, hi).unwrap().value());
        prop_assert!(dephasing_rate(l, 40.0, 410.0, lo) <= dephasing_rate(l, 40.0, 410.0, hi));
        let curve = efficiency_curve(&AddedNoiseModel::new(n_jpa, n_hemt), &[lo, hi]).unwrap();
        prop_assert!(curve.points[0].eta <= curve.points[1].eta + 1e-15);
        prop_assert!(curve.points.iter().all(|p| p.eta > 0.0 && p.eta <= 1.0));
    }

    #[test]
    fn dephasing_fit_is_scale_covariant(seed: u64, l in 5e-5..5e-4f64, scale in 0.1..10.0f64) {
        let data = simulate_dephasing_data(&dephasing_gains(), l, 40.0, 410.0, 0.05, seed).unwrap();
        let scaled: Vec<DephasingPoint> = data
            .iter()
            .map(|p| DephasingPoint { gain_db: p.gain_db, gamma: p.gamma * scale, gamma_err: p.gamma_err * scale })
            .collect();
        let a = fit_dephasing(&data, 410.0).unwrap();
        let b = fit_dephasing(&scaled, 410.0 * scale).unwrap();
        prop_assert!((a.isolation_l - b.isolation_l).abs() <= 1e-9 * a.isolation_l.abs().max(1e-12));
        prop_assert!((b.gamma0 / scale - a.gamma0).abs() <= 1e-9 * a.gamma0.abs().max(1.0));
    }

    #[test]
    fn noiseless_sweeps_fit_exactly(n_jpa in 0.0..1.0f64, n_hemt in 1.0..50.0f64, post in 0.0..60.0f64) {
        let chain = ChainConfig { n_jpa, n_hemt, post_gain_db: post, ..ChainConfig::default() };
        let pts = simulate_thermal_sweep(&sweep_temperatures(), &[20.0, 25.0, 30.0], &chain, 0.0, 0).unwrap();
        let fits = fit_thermal_sweep(&pts).unwrap();
        for f in &fits {
            let scale = f.residuals.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
            prop_assert!(f.residuals.iter().all(|r| r.4.abs() <= 1e-12 * scale));
            let g = 10f64.powf(f.gain_db / 10.0);
            prop_assert!((f.n_add - (n_jpa + n_hemt / g)).abs() < 1e-9);
        }
        let model = fit_added_noise_model(&fits).unwrap();
        prop_assert!((model.n_jpa - n_jpa).abs() < 1e-8 && (model.n_hemt - n_hemt).abs() < 1e-6);
    }

    #[test]
    fn added_noise_ignores_output_scale(seed: u64, factor in 1e-3..1e3f64) {
        let pts = simulate_thermal_sweep(&sweep_temperatures(), &[20.0, 25.0, 30.0], &ChainConfig::default(), 0.02, seed).unwrap();
        let scaled: Vec<_> = pts
            .iter()
            .map(|p| iphoton_core::simulator::SweepPoint { s_out: p.s_out * factor, s_out_err: p.s_out_err * factor, ..*p })
            .collect();
        for (a, b) in fit_thermal_sweep(&pts).unwrap().iter().zip(&fit_thermal_sweep(&scaled).unwrap()) {
            prop_assert!((a.n_add - b.n_add).abs() < 1e-9 * a.n_add.abs().max(1.0));
            prop_assert!((a.n_add_err - b.n_add_err).abs() < 1e-9 * a.n_add_err.max(1e-12));
        }
    }
}

const SEEDS: u64 = 1000;

/// Fraction of the seeds whose `estimate +/- 2 sigma` contains `truth`.
fn coverage(f: impl Fn(u64) -> (f64, f64) + Sync, truth: f64) -> f64 {
    let hits: usize = (0..SEEDS)
        .into_par_iter()
        .map(|seed| {
            let (est, err) = f(seed);
            ((est - truth).abs() <= 2.0 * err) as usize
        })
        .sum();
    hits as f64 / SEEDS as f64
}

fn dephasing_study(seed: u64) -> BackactionModel {
    let data = simulate_dephasing_data(&dephasing_gains(), 2.1e-4, 40.0, 410.0, 0.05, seed).unwrap();
    fit_dephasing(&data, 410.0).unwrap()
}

fn noise_study(seed: u64) -> AddedNoiseModel {
    let pts = simulate_thermal_sweep(&sweep_temperatures(), &[20.0, 25.0, 30.0], &ChainConfig::default(), 0.02, seed).unwrap();
    fit_added_noise_model(&fit_thermal_sweep(&pts).unwrap()).unwrap()
}

#[test]
fn propagated_bands_cover_the_truth() {
    let chain = ChainConfig::default();
    let truth = BackactionModel::new(chain.isolation_l, 40.0, 410.0).unwrap();
    let mut failures = Vec::new();
    for gain in [17.0, 21.0, 25.0, 29.0, 33.0] {
        let eta_truth = 1.0 / (2.0 * AddedNoiseModel::new(chain.n_jpa, chain.n_hemt).n_add(gain) + 1.0);
        let eta = coverage(|s| { let p = efficiency_curve(&noise_study(s), &[gain]).unwrap().points[0]; (p.eta, p.eta_err) }, eta_truth);
        let nbar_truth = nbar_from_gain(&truth, gain).unwrap().value();
        let nbar = coverage(
            |s| { let m = dephasing_study(s); (nbar_from_gain(&m, gain).unwrap().value(), nbar_err_from_gain(&m, gain)) },
            nbar_truth,
        );
        println!("{gain} dB: eta band covers {:.1}%, nbar band covers {:.1}%", 100.0 * eta, 100.0 * nbar);
        for (name, c) in [("eta", eta), ("nbar", nbar)] {
            if c < 0.95 {
                failures.push(format!("{name} at {gain} dB: {:.1}%", 100.0 * c));
            }
        }
    }
    assert!(failures.is_empty(), "coverage below 95%: {failures:?}");
}

/// Standardized errors `(estimate - truth) / sigma` of the fitted parameters
/// have zero mean and unit spread; both checked to three standard errors.
#[test]
fn fitted_parameter_errors_are_calibrated() {
    let z = |f: &(dyn Fn(u64) -> f64 + Sync)| -> (f64, f64) {
        let v: Vec<f64> = (0..SEEDS).into_par_iter().map(f).collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        (mean, (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
    };
    let cases: [(&str, (f64, f64)); 4] = [
        ("L", z(&|s| { let m = dephasing_study(s); (m.isolation_l - 2.1e-4) / m.isolation_err() })),
        ("Gamma0", z(&|s| { let m = dephasing_study(s); (m.gamma0 - 40.0) / m.gamma0_err() })),
        ("N_JPA", z(&|s| { let m = noise_study(s); (m.n_jpa - 0.39) / m.covariance[0][0].sqrt() })),
        ("N_HEMT", z(&|s| { let m = noise_study(s); (m.n_hemt - 18.0) / m.covariance[1][1].sqrt() })),
    ];
    let n = SEEDS as f64;
    for (name, (mean, sd)) in cases {
        println!("{name}: z mean {mean:.3}, z sd {sd:.3}");
        assert!(mean.abs() < 3.0 / n.sqrt(), "{name}: z mean {mean}");
        assert!((sd - 1.0).abs() < 3.0 / (2.0 * n).sqrt(), "{name}: z sd {sd}");
    }
}
