//! Measurement-chain characterization: backaction from qubit dephasing,
//! added noise from thermal noise-power sweeps, and the efficiency model
//! used to predict the measured photon state.
//!
//! Rates are handled as `rate / 2pi` in kHz throughout.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{expected_measured_state, fidelity_diagonal, DiagonalDensityMatrix, ThermalOccupation};
use crate::simulator::{DephasingPoint, SweepPoint};
use crate::tomography::ReconstructionResult;

/// Frequency at which noise powers are quoted (GHz).
pub const SWEEP_FREQUENCY_GHZ: f64 = 5.8;

const PLANCK: f64 = 6.626_070_15e-34;
const BOLTZMANN: f64 = 1.380_649e-23;

/// Symmetric thermal noise power `1 / (e^{hf/kT} - 1) + 1/2` in quanta.
pub fn planck_occupation(temperature_mk: f64, frequency_ghz: f64) -> Result<f64> {
    if !(temperature_mk > 0.0) || !(frequency_ghz > 0.0) {
        return Err(Error::Domain(format!(
            "need positive temperature and frequency, got {temperature_mk} mK and {frequency_ghz} GHz"
        )));
    }
    let x = PLANCK * frequency_ghz * 1e9 / (BOLTZMANN * temperature_mk * 1e-3);
    Ok(1.0 / x.exp_m1() + 0.5)
}

fn power_gain(gain_db: f64) -> f64 {
    10f64.powf(gain_db / 10.0)
}

/// `(G - 1) / 4`: backaction occupation per unit leakage.
fn backaction_lever(gain_db: f64) -> f64 {
    0.25 * (power_gain(gain_db) - 1.0)
}

/// `Gamma0 + kappa (2 nbar + 2 nbar^2)` with `nbar = L (G - 1) / 4`.
pub fn dephasing_rate(isolation_l: f64, gamma0: f64, kappa: f64, gain_db: f64) -> f64 {
    let nbar = isolation_l * backaction_lever(gain_db);
    gamma0 + kappa * (2.0 * nbar + 2.0 * nbar * nbar)
}

/// Leakage and intrinsic dephasing fit from dephasing-versus-gain data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackactionModel {
    pub isolation_l: f64,
    /// Intrinsic dephasing Gamma0 / 2pi (kHz).
    pub gamma0: f64,
    /// Cavity decay kappa / 2pi (kHz).
    pub kappa: f64,
    /// Covariance of `(isolation_l, gamma0)`.
    pub covariance: [[f64; 2]; 2],
}

impl BackactionModel {
    /// Exact model with no fit uncertainty.
    pub fn new(isolation_l: f64, gamma0: f64, kappa: f64) -> Result<Self> {
        if !(isolation_l >= 0.0 && gamma0 >= 0.0 && kappa > 0.0) {
            return Err(Error::Domain("need L >= 0, gamma0 >= 0 and kappa > 0".into()));
        }
        Ok(Self { isolation_l, gamma0, kappa, covariance: [[0.0; 2]; 2] })
    }

    pub fn isolation_err(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }

    pub fn gamma0_err(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }

    pub fn gamma(&self, gain_db: f64) -> f64 {
        dephasing_rate(self.isolation_l, self.gamma0, self.kappa, gain_db)
    }

    /// `(gain_db, gamma, model, residual)` rows.
    pub fn residuals(&self, data: &[DephasingPoint]) -> Vec<(f64, f64, f64, f64)> {
        data.iter()
            .map(|p| {
                let m = self.gamma(p.gain_db);
                (p.gain_db, p.gamma, m, p.gamma - m)
            })
            .collect()
    }
}

/// Backaction occupation `L (G - 1) / 4` at a JPA gain.
pub fn nbar_from_gain(model: &BackactionModel, gain_db: f64) -> Result<ThermalOccupation> {
    if !(gain_db >= 0.0) {
        return Err(Error::Domain(format!("gain must be >= 0 dB, got {gain_db}")));
    }
    ThermalOccupation::new(model.isolation_l * backaction_lever(gain_db))
}

/// Standard error of the backaction occupation at a gain.
pub fn nbar_err_from_gain(model: &BackactionModel, gain_db: f64) -> f64 {
    model.isolation_err() * backaction_lever(gain_db)
}

/// Weights `1 / err^2` when every point carries a positive error, unit
/// weights otherwise. The flag tells whether the errors are absolute.
fn weights(errors: impl Iterator<Item = f64> + Clone) -> (Vec<f64>, bool) {
    if errors.clone().all(|e| e > 0.0 && e.is_finite()) {
        (errors.map(|e| 1.0 / (e * e)).collect(), true)
    } else {
        (errors.map(|_| 1.0).collect(), false)
    }
}

/// Weighted linear least squares. Returns coefficients, covariance and
/// chi-square. Without absolute errors the covariance is scaled by the
/// reduced chi-square.
fn weighted_linear_fit(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &[f64],
    absolute: bool,
) -> Result<(DVector<f64>, DMatrix<f64>, f64)> {
    let (n, p) = design.shape();
    let sw = DVector::from_iterator(n, w.iter().map(|w| w.sqrt()));
    let a = DMatrix::from_fn(n, p, |i, j| design[(i, j)] * sw[i]);
    let b = y.component_mul(&sw);
    let normal = a.transpose() * &a;
    // relative conditioning of the normal matrix after column scaling
    let scale = DVector::from_iterator(p, (0..p).map(|j| normal[(j, j)].sqrt()));
    if scale.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Conditioning("design column is identically zero".into()));
    }
    let scaled = DMatrix::from_fn(p, p, |i, j| normal[(i, j)] / (scale[i] * scale[j]));
    let eig = scaled.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0f64), |(lo, hi), e| (lo.min(*e), hi.max(*e)));
    if !(lo > hi * 1e-12) {
        return Err(Error::Conditioning(format!("normal matrix is singular (eigenvalues {lo:.3e} .. {hi:.3e})")));
    }
    let inv_scaled = scaled.try_inverse().ok_or_else(|| Error::Conditioning("normal matrix not invertible".into()))?;
    let mut cov = DMatrix::from_fn(p, p, |i, j| inv_scaled[(i, j)] / (scale[i] * scale[j]));
    let beta = &cov * (a.transpose() * &b);
    let chi2 = (&a * &beta - &b).norm_squared();
    if !absolute {
        let dof = n.saturating_sub(p);
        cov *= if dof > 0 { chi2 / dof as f64 } else { 0.0 };
    }
    Ok((beta, cov, chi2))
}

/// Weighted least-squares fit of `Gamma = Gamma0 + kappa (2 nbar + 2 nbar^2)`
/// over `(L, Gamma0)` by damped Gauss–Newton iteration, seeded by the fit
/// that drops the quadratic term.
pub fn fit_dephasing(data: &[DephasingPoint], kappa: f64) -> Result<BackactionModel> {
    if data.len() < 3 {
        return Err(Error::Underdetermined(format!("dephasing fit needs >= 3 points, got {}", data.len())));
    }
    if !(kappa > 0.0) {
        return Err(Error::Domain("kappa must be positive".into()));
    }
    let (w, absolute) = weights(data.iter().map(|p| p.gamma_err));
    let u: Vec<f64> = data.iter().map(|p| backaction_lever(p.gain_db)).collect();
    let y: Vec<f64> = data.iter().map(|p| p.gamma).collect();

    let linear = DMatrix::from_fn(data.len(), 2, |i, j| if j == 0 { 2.0 * kappa * u[i] } else { 1.0 });
    let (seed, _, _) = weighted_linear_fit(&linear, &DVector::from_vec(y.clone()), &w, true)?;
    let mut p = Vector2::new(seed[0], seed[1]);

    let cost = |p: &Vector2<f64>| -> f64 {
        (0..y.len())
            .map(|i| {
                let n = p[0] * u[i];
                w[i] * (y[i] - p[1] - kappa * (2.0 * n + 2.0 * n * n)).powi(2)
            })
            .sum()
    };
    let normal_at = |p: &Vector2<f64>| -> (Matrix2<f64>, Vector2<f64>) {
        let mut jtj = Matrix2::zeros();
        let mut jtr = Vector2::zeros();
        for i in 0..y.len() {
            let n = p[0] * u[i];
            let r = y[i] - p[1] - kappa * (2.0 * n + 2.0 * n * n);
            let j = Vector2::new(2.0 * kappa * u[i] * (1.0 + 2.0 * n), 1.0);
            jtj += w[i] * j * j.transpose();
            jtr += w[i] * r * j;
        }
        (jtj, jtr)
    };

    let mut lambda = 1e-3;
    let mut current = cost(&p);
    let mut converged = false;
    for _ in 0..200 {
        let (jtj, jtr) = normal_at(&p);
        let damped = jtj + lambda * Matrix2::from_diagonal(&jtj.diagonal());
        let Some(step) = damped.try_inverse().map(|m| m * jtr) else {
            return Err(Error::Fit("singular dephasing normal equations".into()));
        };
        let trial = p + step;
        let c = cost(&trial);
        if c <= current {
            let small = (0..2).all(|k| step[k].abs() <= 1e-12 * trial[k].abs().max(1e-300));
            p = trial;
            let improvement = current - c;
            current = c;
            lambda = (lambda / 10.0).max(1e-12);
            if small || improvement <= 1e-15 * current.max(1e-300) {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::Fit("dephasing fit did not converge".into()));
    }
    // the cost is flat to ~sqrt(eps) around the optimum; undamped steps
    // driven by the gradient locate it to near machine precision
    for _ in 0..5 {
        let (jtj, jtr) = normal_at(&p);
        let Some(step) = jtj.try_inverse().map(|m| m * jtr) else { break };
        p += step;
        if (0..2).all(|k| step[k].abs() <= 1e-14 * p[k].abs().max(1e-300)) {
            break;
        }
    }
    let current = cost(&p);

    let (jtj, _) = normal_at(&p);
    let mut cov = jtj.try_inverse().ok_or_else(|| Error::Fit("singular dephasing covariance".into()))?;
    if !absolute {
        let dof = (data.len() - 2) as f64;
        cov *= current / dof;
    }
    // round-off may leave an exactly flat data set a hair below zero, so
    // only leakage with a visible effect on the largest rate counts
    let lever = 2.0 * kappa * u.iter().copied().fold(0.0, f64::max);
    let rate_scale = y.iter().map(|g| g.abs()).fold(0.0, f64::max);
    if p[0] * lever < -1e-12 * rate_scale || p[1] < -1e-12 * rate_scale {
        return Err(Error::Fit(format!("negative parameters at optimum: L = {:.3e}, gamma0 = {:.3e}", p[0], p[1])));
    }
    Ok(BackactionModel {
        isolation_l: p[0].max(0.0),
        gamma0: p[1].max(0.0),
        kappa,
        covariance: [[cov[(0, 0)], cov[(0, 1)]], [cov[(1, 0)], cov[(1, 1)]]],
    })
}

/// Straight-line fit of one gain's sweep, `S_out = G S_in + G N_add`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainFit {
    pub gain_db: f64,
    /// Chain gain (slope).
    pub chain_gain: f64,
    pub chain_gain_err: f64,
    /// Input-referred added noise (intercept over slope).
    pub n_add: f64,
    pub n_add_err: f64,
    /// `(temperature_mk, s_in, s_out, model, residual)` rows.
    pub residuals: Vec<(f64, f64, f64, f64, f64)>,
}

/// Fits every gain of a sweep table separately. Gains appear in the order
/// they first occur.
pub fn fit_thermal_sweep(points: &[SweepPoint]) -> Result<Vec<GainFit>> {
    let mut gains: Vec<f64> = Vec::new();
    for p in points {
        if !gains.contains(&p.gain_db) {
            gains.push(p.gain_db);
        }
    }
    if gains.is_empty() {
        return Err(Error::Underdetermined("empty sweep table".into()));
    }
    gains
        .into_iter()
        .map(|g| {
            let rows: Vec<&SweepPoint> = points.iter().filter(|p| p.gain_db == g).collect();
            fit_one_gain(g, &rows)
        })
        .collect()
}

fn fit_one_gain(gain_db: f64, rows: &[&SweepPoint]) -> Result<GainFit> {
    if rows.len() < 3 {
        return Err(Error::Underdetermined(format!(
            "gain {gain_db} dB has {} temperatures, need >= 3",
            rows.len()
        )));
    }
    let mean = rows.iter().map(|p| p.s_in).sum::<f64>() / rows.len() as f64;
    let spread = rows.iter().map(|p| (p.s_in - mean).abs()).fold(0.0, f64::max);
    if !(spread > 1e-9 * mean.abs().max(1e-300)) {
        return Err(Error::Conditioning(format!("gain {gain_db} dB: no spread in input noise power")));
    }
    let (w, absolute) = weights(rows.iter().map(|p| p.s_out_err));
    let design = DMatrix::from_fn(rows.len(), 2, |i, j| if j == 0 { rows[i].s_in } else { 1.0 });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|p| p.s_out));
    let (beta, cov, _) = weighted_linear_fit(&design, &y, &w, absolute)?;
    let (slope, intercept) = (beta[0], beta[1]);
    if !(slope > 0.0) {
        return Err(Error::Fit(format!("gain {gain_db} dB: non-positive chain gain {slope}")));
    }
    let n_add = intercept / slope;
    // delta method on intercept / slope
    let grad = [-intercept / (slope * slope), 1.0 / slope];
    let var = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| grad[i] * grad[j] * cov[(i, j)]).sum::<f64>();
    let residuals = rows
        .iter()
        .map(|p| {
            let m = slope * p.s_in + intercept;
            (p.temperature_mk, p.s_in, p.s_out, m, p.s_out - m)
        })
        .collect();
    Ok(GainFit {
        gain_db,
        chain_gain: slope,
        chain_gain_err: cov[(0, 0)].sqrt(),
        n_add,
        n_add_err: var.max(0.0).sqrt(),
        residuals,
    })
}

/// `N_add(G) = N_JPA + N_HEMT / G_JPA`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddedNoiseModel {
    pub n_jpa: f64,
    pub n_hemt: f64,
    /// Covariance of `(n_jpa, n_hemt)`.
    pub covariance: [[f64; 2]; 2],
    pub per_gain: Vec<GainFit>,
}

impl AddedNoiseModel {
    /// Exact model with no fit uncertainty.
    pub fn new(n_jpa: f64, n_hemt: f64) -> Self {
        Self { n_jpa, n_hemt, covariance: [[0.0; 2]; 2], per_gain: Vec::new() }
    }

    pub fn n_add(&self, gain_db: f64) -> f64 {
        self.n_jpa + self.n_hemt / power_gain(gain_db)
    }

    pub fn n_add_err(&self, gain_db: f64) -> f64 {
        let v = [1.0, 1.0 / power_gain(gain_db)];
        let c = &self.covariance;
        (v[0] * v[0] * c[0][0] + 2.0 * v[0] * v[1] * c[0][1] + v[1] * v[1] * c[1][1]).max(0.0).sqrt()
    }

    /// Phase-insensitive amplification adds at least a quarter quantum; a
    /// smaller JPA figure is expected for phase-sensitive operation.
    pub fn below_phase_insensitive_limit(&self) -> bool {
        self.n_jpa < 0.25
    }
}

/// Weighted least squares of `N_add` on `(1, 1 / G_JPA)`.
pub fn fit_added_noise_model(per_gain: &[GainFit]) -> Result<AddedNoiseModel> {
    let mut distinct: Vec<f64> = per_gain.iter().map(|g| g.gain_db).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Underdetermined(format!(
            "added-noise model needs >= 2 distinct gains, got {}",
            distinct.len()
        )));
    }
    let (w, absolute) = weights(per_gain.iter().map(|g| g.n_add_err));
    let design =
        DMatrix::from_fn(per_gain.len(), 2, |i, j| if j == 0 { 1.0 } else { 1.0 / power_gain(per_gain[i].gain_db) });
    let y = DVector::from_iterator(per_gain.len(), per_gain.iter().map(|g| g.n_add));
    let (beta, cov, _) = weighted_linear_fit(&design, &y, &w, absolute)?;
    Ok(AddedNoiseModel {
        n_jpa: beta[0],
        n_hemt: beta[1],
        covariance: [[cov[(0, 0)], cov[(0, 1)]], [cov[(1, 0)], cov[(1, 1)]]],
        per_gain: per_gain.to_vec(),
    })
}

/// `1 / (2 N_add + 1)`.
pub fn efficiency_from_added_noise(n_add: f64) -> Result<f64> {
    if !(n_add >= 0.0) {
        return Err(Error::Domain(format!("added noise must be >= 0, got {n_add}")));
    }
    Ok(1.0 / (2.0 * n_add + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPoint {
    pub gain_db: f64,
    pub eta: f64,
    /// First-order standard error.
    pub eta_err: f64,
}

/// Efficiency versus gain through the added-noise model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCurve {
    pub model: AddedNoiseModel,
    pub gain_range: (f64, f64),
    pub points: Vec<EfficiencyPoint>,
}

impl EfficiencyCurve {
    /// Efficiency and its standard error at a gain inside the range.
    pub fn at(&self, gain_db: f64) -> Result<EfficiencyPoint> {
        let (lo, hi) = self.gain_range;
        if !(lo..=hi).contains(&gain_db) {
            return Err(Error::Domain(format!("gain {gain_db} dB outside curve range [{lo}, {hi}]")));
        }
        efficiency_point(&self.model, gain_db)
    }
}

fn efficiency_point(model: &AddedNoiseModel, gain_db: f64) -> Result<EfficiencyPoint> {
    let n = model.n_add(gain_db);
    let eta = efficiency_from_added_noise(n.max(0.0))?;
    // d eta / d N = -2 eta^2
    Ok(EfficiencyPoint { gain_db, eta, eta_err: 2.0 * eta * eta * model.n_add_err(gain_db) })
}

/// Samples the efficiency model on `gains_db`, whose extremes become the
/// curve range.
pub fn efficiency_curve(model: &AddedNoiseModel, gains_db: &[f64]) -> Result<EfficiencyCurve> {
    if gains_db.is_empty() {
        return Err(Error::Domain("empty gain grid".into()));
    }
    let lo = gains_db.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gains_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let points = gains_db.iter().map(|&g| efficiency_point(model, g)).collect::<Result<_>>()?;
    Ok(EfficiencyCurve { model: model.clone(), gain_range: (lo, hi), points })
}

/// A fidelity with its statistical error and systematic band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandedValue {
    pub value: f64,
    pub stat_err: f64,
    pub sys_lo: f64,
    pub sys_hi: f64,
}

impl BandedValue {
    /// Whether `target` lies inside the systematic band widened by `k`
    /// statistical standard errors on each side.
    pub fn contains(&self, target: f64, k: f64) -> bool {
        target >= self.sys_lo - k * self.stat_err && target <= self.sys_hi + k * self.stat_err
    }
}

/// Measured state against the state the chain model predicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationComparison {
    pub gain_db: f64,
    pub eta: f64,
    pub eta_err: f64,
    pub escape_probability: f64,
    pub expected: Vec<f64>,
    pub measured: Vec<f64>,
    /// `F(rho_m, rho_exp)`.
    pub fidelity_expected: BandedValue,
    /// `F(rho_m, |1><1|) = sqrt(rho_11)`.
    pub fidelity_ideal: BandedValue,
    /// Unit fidelity lies within the expected-fidelity band widened by two
    /// statistical errors.
    pub consistent_with_unity: bool,
}

fn sem(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
}

fn band(value: f64, per_set: &[f64], alternatives: &[f64]) -> BandedValue {
    let lo = alternatives.iter().copied().fold(value, f64::min);
    let hi = alternatives.iter().copied().fold(value, f64::max);
    BandedValue { value, stat_err: sem(per_set), sys_lo: lo, sys_hi: hi }
}

/// Compares a reconstruction with `{1 - (kappa_out/kappa) eta, (kappa_out/kappa) eta}`.
///
/// The statistical error comes from the spread of per-set fidelities. The
/// systematic band spans the amplified-assumption reconstruction and the
/// efficiency moved by one standard error either way.
pub fn compare_to_expectation(
    measured: &ReconstructionResult,
    kappa: f64,
    kappa_out: f64,
    curve: &EfficiencyCurve,
    gain_db: f64,
) -> Result<ExpectationComparison> {
    let point = curve.at(gain_db)?;
    let expected_at = |eta: f64| expected_measured_state(kappa, kappa_out, eta.clamp(0.0, 1.0));
    let expected = expected_at(point.eta)?;
    let rho = &measured.squeezed.mean;
    let f_exp = |r: &DiagonalDensityMatrix| fidelity_diagonal(r, &expected);
    let f_ideal = |r: &DiagonalDensityMatrix| r.population(1).sqrt();

    let per_set_exp: Vec<f64> = measured.squeezed.per_set.iter().map(f_exp).collect();
    let per_set_ideal: Vec<f64> = measured.squeezed.per_set.iter().map(f_ideal).collect();
    let exp_alternatives = [
        f_exp(&measured.amplified.mean),
        fidelity_diagonal(rho, &expected_at(point.eta - point.eta_err)?),
        fidelity_diagonal(rho, &expected_at(point.eta + point.eta_err)?),
    ];
    let fidelity_expected = band(f_exp(rho), &per_set_exp, &exp_alternatives);
    let fidelity_ideal = band(f_ideal(rho), &per_set_ideal, &[f_ideal(&measured.amplified.mean)]);
    Ok(ExpectationComparison {
        gain_db,
        eta: point.eta,
        eta_err: point.eta_err,
        escape_probability: kappa_out / kappa,
        expected: expected.populations().to_vec(),
        measured: rho.populations().to_vec(),
        consistent_with_unity: fidelity_expected.contains(1.0, 2.0),
        fidelity_expected,
        fidelity_ideal,
    })
}

#[cfg(test)]
mod tests;
