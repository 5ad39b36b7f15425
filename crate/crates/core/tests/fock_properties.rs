use iphoton_core::fock::{
    fidelity_diagonal, fock_marginal_pdf, g2_zero, loss_channel, mixture_pdf, DiagonalDensityMatrix,
};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

fn config(cases: u32) -> Config {
    Config { cases, rng_seed: RngSeed::Fixed(0x5eed_f0c4), failure_persistence: None, ..Config::default() }
}

fn populations(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = DiagonalDensityMatrix> {
    prop::collection::vec(0.0..1.0f64, len).prop_filter_map("all-zero weights", |w| {
        DiagonalDensityMatrix::from_weights(&w).ok()
    })
}

/// Simpson's rule on `[lo, hi]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(m.clone());
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

/// Root fidelity `tr sqrt(sqrt(a) b sqrt(a))` of two states conjugated by
/// a random rotation, so the oracle never sees diagonal matrices.
fn matrix_fidelity(a: &[f64], b: &[f64], rotation_seed: &[f64]) -> f64 {
    let n = a.len();
    let raw = DMatrix::from_fn(n, n, |i, j| rotation_seed[(i * n + j) % rotation_seed.len()] + if i == j { 1.0 } else { 0.0 });
    let q = raw.qr().q();
    let da = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(a)) * q.transpose();
    let db = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(b)) * q.transpose();
    let sa = psd_sqrt(&da);
    let m = &sa * db * &sa;
    let m = (&m + m.transpose()) * 0.5;
    SymmetricEigen::new(m).eigenvalues.iter().map(|v| v.max(0.0).sqrt()).sum()
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn loss_channels_compose(rho in populations(1..=8), t1 in 0.0..=1.0f64, t2 in 0.0..=1.0f64) {
        let twice = loss_channel(&loss_channel(&rho, t1).unwrap(), t2).unwrap();
        let once = loss_channel(&rho, t1 * t2).unwrap();
        for n in 0..=rho.n_max() {
            prop_assert!((twice.population(n) - once.population(n)).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_preserves_trace_and_never_adds_photons(rho in populations(1..=8), t in 0.0..=1.0f64) {
        let out = loss_channel(&rho, t).unwrap();
        prop_assert!((out.populations().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((out.mean_photon_number() - t * rho.mean_photon_number()).abs() < 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(a in populations(4..=4), b in populations(4..=4)) {
        let fab = fidelity_diagonal(&a, &b);
        prop_assert_eq!(fab, fidelity_diagonal(&b, &a));
        prop_assert!((0.0..=1.0).contains(&fab));
        prop_assert!((fidelity_diagonal(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_matches_matrix_square_root_oracle(
        a in populations(2..=5),
        b in populations(2..=5),
        rot in prop::collection::vec(-1.0..1.0f64, 25),
    ) {
        let n = a.n_max().max(b.n_max()) + 1;
        let a = a.resized(n - 1);
        let b = b.resized(n - 1);
        let oracle = matrix_fidelity(a.populations(), b.populations(), &rot);
        prop_assert!((fidelity_diagonal(&a, &b) - oracle).abs() < 1e-7, "{} vs {}", fidelity_diagonal(&a, &b), oracle);
    }

    #[test]
    fn g2_ignores_zero_padding(rho in populations(2..=6), extra in 1usize..6) {
        prop_assume!(rho.mean_photon_number() > 1e-9);
        let mut padded = rho.populations().to_vec();
        padded.extend(std::iter::repeat_n(0.0, extra));
        let padded = DiagonalDensityMatrix::new(padded).unwrap();
        prop_assert_eq!(g2_zero(&rho).unwrap(), g2_zero(&padded).unwrap());
    }

    #[test]
    fn mixture_pdf_is_the_weighted_marginal_sum(rho in populations(1..=6), x in -4.0..4.0f64) {
        let direct: f64 = (0..=rho.n_max()).map(|n| rho.population(n) * fock_marginal_pdf(n, x).unwrap()).sum();
        prop_assert!((mixture_pdf(&rho, x).unwrap() - direct).abs() < 1e-14);
    }
}

#[test]
fn marginals_integrate_to_one_up_to_ten() {
    for n in 0..=10 {
        let total = simpson(|x| fock_marginal_pdf(n, x).unwrap(), -12.0, 12.0, 4000);
        assert!((total - 1.0).abs() < 1e-8, "n = {n}: {total}");
    }
}

/// Noisy amplification of a single photon: convolve `P_1` with Gaussian noise
/// of variance `N/2`, then shrink `x` by `1/sqrt(2N+1)`.
fn amplified_single_photon_pdf(n_add: f64, x: f64) -> f64 {
    let scale = (2.0 * n_add + 1.0).sqrt();
    let var = n_add / 2.0;
    let gauss = |u: f64| (-u * u / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
    let y = x * scale;
    let width = 12.0 * var.sqrt() + 8.0;
    scale * simpson(|u| fock_marginal_pdf(1, u).unwrap() * gauss(y - u), y - width, y + width, 6000)
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn added_noise_equals_loss(n_add in 0.05..1.5f64, x in -3.0..3.0f64) {
        let eta = 1.0 / (2.0 * n_add + 1.0);
        let lossy = loss_channel(&DiagonalDensityMatrix::fock(1, 1).unwrap(), eta).unwrap();
        let direct = mixture_pdf(&lossy, x).unwrap();
        prop_assert!((amplified_single_photon_pdf(n_add, x) - direct).abs() < 1e-9);
    }
}
