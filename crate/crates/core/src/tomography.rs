//! Diagonal density-matrix reconstruction from single-quadrature samples.
//!
//! Each photon set is calibrated against its paired control set, whose
//! variance is pinned to a known target, and the calibrated samples are then
//! fit by a mixture of Fock marginals. Two calibration assumptions bracket
//! the unknown phase between the measured quadrature and the squeezed
//! quadrature of the backaction field:
//!
//! * squeezed: the control variance is the vacuum variance 1/4;
//! * amplified: the control variance is `1/4 + nbar`.
//!
//! The central value uses the squeezed assumption; the amplified pipeline
//! supplies the other edge of the systematic band.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{fock_marginals_into, g2_zero, DiagonalDensityMatrix, ThermalOccupation, VACUUM_VARIANCE};

/// One measurement set of quadrature values.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureDataset {
    values: Vec<f64>,
    calibrated: bool,
    set_id: String,
}

impl QuadratureDataset {
    /// Raw values in V·√µs.
    pub fn uncalibrated(set_id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::build(set_id.into(), values, false)
    }

    /// Values already in vacuum-variance-1/4 units.
    pub fn calibrated(set_id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::build(set_id.into(), values, true)
    }

    fn build(set_id: String, values: Vec<f64>, calibrated: bool) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Data(format!("data set '{set_id}' is empty")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("data set '{set_id}' holds non-finite value {v}")));
        }
        Ok(Self { values, calibrated, set_id })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_calibrated(&self) -> bool {
        self.calibrated
    }

    pub fn set_id(&self) -> &str {
        &self.set_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Zero-mean second moment.
    pub fn mean_square(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>() / self.values.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationAssumption {
    Squeezed,
    Amplified,
}

impl CalibrationAssumption {
    /// Control-set quadrature variance assumed under this hypothesis.
    pub fn control_variance(self, nbar: ThermalOccupation) -> f64 {
        match self {
            Self::Squeezed => VACUUM_VARIANCE,
            Self::Amplified => VACUUM_VARIANCE + nbar.value(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// V·√µs per quadrature unit.
    pub apparatus_gain: f64,
    pub assumed_control_variance: f64,
    pub assumption: CalibrationAssumption,
}

impl CalibrationResult {
    /// Converts raw values to quadrature units; calibrated input is an error.
    pub fn apply(&self, data: &QuadratureDataset) -> Result<QuadratureDataset> {
        if data.calibrated {
            return Err(Error::Data(format!("data set '{}' is already calibrated", data.set_id)));
        }
        let values = data.values.iter().map(|v| v / self.apparatus_gain).collect();
        QuadratureDataset::calibrated(data.set_id.clone(), values)
    }
}

/// Maximum-likelihood scale of a zero-mean Gaussian fit to the control set,
/// expressed as the gain that maps the assumed control variance onto it.
pub fn calibrate_gain(
    control: &QuadratureDataset,
    assumption: CalibrationAssumption,
    nbar_backaction: ThermalOccupation,
) -> Result<CalibrationResult> {
    if control.calibrated {
        return Err(Error::Data(format!(
            "control set '{}' is already calibrated",
            control.set_id
        )));
    }
    let variance = control.mean_square();
    if !(variance > 0.0) {
        return Err(Error::Data(format!("control set '{}' has zero variance", control.set_id)));
    }
    let target = assumption.control_variance(nbar_backaction);
    Ok(CalibrationResult {
        apparatus_gain: (variance / target).sqrt(),
        assumed_control_variance: target,
        assumption,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    /// Sample-level maximum likelihood by expectation-maximization.
    MaximumLikelihood,
    /// Least squares against a density histogram.
    Histogram,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub method: FitMethod,
    /// Relative change of the log-likelihood that ends EM.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { method: FitMethod::MaximumLikelihood, tolerance: 1e-8, max_iterations: 10_000 }
    }
}

/// Outcome of an EM fit of mixture weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    pub weights: Vec<f64>,
    /// Log-likelihood of the starting weights and after every update.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
}

/// Row-major table of `P_n(x_i)`.
fn marginal_table(values: &[f64], n_max: usize) -> Result<Vec<f64>> {
    let k = n_max + 1;
    let mut table = vec![0.0; values.len() * k];
    for (row, &x) in table.chunks_mut(k).zip(values) {
        fock_marginals_into(x, row)?;
    }
    Ok(table)
}

/// Maximizes `sum_i log sum_n w_n P_n(x_i)` over the probability simplex.
///
/// Multiplicative EM updates keep the weights normalized and nonnegative
/// and never decrease the likelihood.
pub fn em_fit(values: &[f64], n_max: usize, tolerance: f64, max_iterations: usize) -> Result<EmFit> {
    if values.is_empty() {
        return Err(Error::Data("cannot fit an empty data set".into()));
    }
    let k = n_max + 1;
    let table = marginal_table(values, n_max)?;
    let n = values.len() as f64;
    let mut weights = vec![1.0 / k as f64; k];
    let mut resp = vec![0.0; k];
    let mut history = Vec::new();

    for iteration in 0..=max_iterations {
        resp.iter_mut().for_each(|r| *r = 0.0);
        let mut ll = 0.0;
        for (i, row) in table.chunks(k).enumerate() {
            let mix: f64 = row.iter().zip(&weights).map(|(p, w)| p * w).sum();
            if !(mix > 0.0) {
                return Err(Error::Data(format!(
                    "sample {} = {} has zero likelihood under every Fock component",
                    i, values[i]
                )));
            }
            ll += mix.ln();
            let inv = 1.0 / mix;
            for ((r, p), w) in resp.iter_mut().zip(row).zip(&weights) {
                *r += w * p * inv;
            }
        }
        if let Some(&prev) = history.last() {
            let change: f64 = ll - prev;
            if change.abs() <= tolerance * f64::abs(prev) {
                history.push(ll);
                return Ok(EmFit { weights, log_likelihood: history, iterations: iteration });
            }
        }
        history.push(ll);
        if iteration == max_iterations {
            break;
        }
        for (w, r) in weights.iter_mut().zip(&resp) {
            *w = r / n;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
    }
    Err(Error::NotConverged {
        what: "expectation-maximization",
        iterations: max_iterations,
        best_objective: *history.last().unwrap_or(&f64::NEG_INFINITY),
        best_point: weights,
    })
}

/// Density histogram with Freedman–Diaconis bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn freedman_diaconis(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Data("histogram needs at least two values".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        };
        let iqr = q(0.75) - q(0.25);
        let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
        if !(max > min) {
            return Err(Error::Data("histogram of constant data".into()));
        }
        let mut width = 2.0 * iqr / (values.len() as f64).cbrt();
        if !(width > 0.0) {
            width = (max - min) / 10.0;
        }
        let bins = (((max - min) / width).ceil() as usize).clamp(1, 10_000);
        let width = (max - min) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| min + i as f64 * width).collect();
        let mut counts = vec![0usize; bins];
        for &v in &sorted {
            let b = (((v - min) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let norm = values.len() as f64 * width;
        Ok(Self { edges, density: counts.iter().map(|&c| c as f64 / norm).collect() })
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    /// Bin-averaged Fock marginals, one row per bin.
    pub fn marginal_bin_averages(&self, n_max: usize) -> Result<Vec<Vec<f64>>> {
        // 5-point Gauss–Legendre on each bin
        const NODES: [f64; 5] = [
            -0.906_179_845_938_664,
            -0.538_469_310_105_683,
            0.0,
            0.538_469_310_105_683,
            0.906_179_845_938_664,
        ];
        const WEIGHTS: [f64; 5] = [
            0.236_926_885_056_189,
            0.478_628_670_499_366,
            0.568_888_888_888_889,
            0.478_628_670_499_366,
            0.236_926_885_056_189,
        ];
        let mut buf = vec![0.0; n_max + 1];
        self.edges
            .windows(2)
            .map(|e| {
                let (mid, half) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
                let mut row = vec![0.0; n_max + 1];
                for (x, w) in NODES.iter().zip(WEIGHTS) {
                    fock_marginals_into(mid + half * x, &mut buf)?;
                    row.iter_mut().zip(&buf).for_each(|(r, p)| *r += 0.5 * w * p);
                }
                Ok(row)
            })
            .collect()
    }

    /// `(bin_center, density, model_density)` rows for plotting.
    pub fn with_model(&self, rho: &DiagonalDensityMatrix) -> Result<Vec<(f64, f64, f64)>> {
        let avg = self.marginal_bin_averages(rho.n_max())?;
        Ok(self
            .centers()
            .into_iter()
            .zip(&self.density)
            .zip(avg)
            .map(|((c, d), row)| (c, *d, row.iter().zip(rho.populations()).map(|(p, w)| p * w).sum()))
            .collect())
    }
}

/// Simplex-constrained least squares `min |A w - h|^2`, `w >= 0`,
/// `sum w = 1`, by enumerating supports and solving each equality-constrained
/// problem through its KKT system.
fn simplex_least_squares(rows: &[Vec<f64>], target: &[f64]) -> Result<Vec<f64>> {
    use nalgebra::{DMatrix, DVector};
    let k = rows.first().map_or(0, Vec::len);
    if k == 0 || k > 13 {
        return Err(Error::Domain(format!("histogram fit supports 1..=13 components, got {k}")));
    }
    let residual = |w: &[f64]| -> f64 {
        rows.iter()
            .zip(target)
            .map(|(r, h)| {
                let m: f64 = r.iter().zip(w).map(|(a, b)| a * b).sum();
                (m - h).powi(2)
            })
            .sum()
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << k) {
        let support: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let s = support.len();
        let mut kkt = DMatrix::<f64>::zeros(s + 1, s + 1);
        let mut rhs = DVector::<f64>::zeros(s + 1);
        for (a, &i) in support.iter().enumerate() {
            for (b, &j) in support.iter().enumerate() {
                kkt[(a, b)] = rows.iter().map(|r| r[i] * r[j]).sum();
            }
            rhs[a] = rows.iter().zip(target).map(|(r, h)| r[i] * h).sum();
            kkt[(a, s)] = 1.0;
            kkt[(s, a)] = 1.0;
        }
        rhs[s] = 1.0;
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        if sol.iter().take(s).any(|w| *w < -1e-12) {
            continue;
        }
        let mut w = vec![0.0; k];
        for (a, &i) in support.iter().enumerate() {
            w[i] = sol[a].max(0.0);
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        let r = residual(&w);
        if best.as_ref().is_none_or(|(b, _)| r < *b) {
            best = Some((r, w));
        }
    }
    best.map(|(_, w)| w)
        .ok_or_else(|| Error::Fit("no feasible support in histogram least squares".into()))
}

/// Histogram least-squares fit of mixture weights.
pub fn histogram_fit(values: &[f64], n_max: usize) -> Result<(DiagonalDensityMatrix, Histogram)> {
    let hist = Histogram::freedman_diaconis(values)?;
    let rows = hist.marginal_bin_averages(n_max)?;
    let w = simplex_least_squares(&rows, &hist.density)?;
    Ok((DiagonalDensityMatrix::from_weights(&w)?, hist))
}

fn calibrated_values(data: &QuadratureDataset, calibration: &CalibrationResult) -> Vec<f64> {
    if data.calibrated {
        data.values.clone()
    } else {
        data.values.iter().map(|v| v / calibration.apparatus_gain).collect()
    }
}

/// Fits Fock populations up to `n_max` with the default maximum-likelihood
/// method. Uncalibrated data are converted with `calibration` first.
pub fn fit_diagonal(
    data: &QuadratureDataset,
    calibration: &CalibrationResult,
    n_max: usize,
) -> Result<DiagonalDensityMatrix> {
    fit_diagonal_with(data, calibration, n_max, &FitOptions::default())
}

pub fn fit_diagonal_with(
    data: &QuadratureDataset,
    calibration: &CalibrationResult,
    n_max: usize,
    options: &FitOptions,
) -> Result<DiagonalDensityMatrix> {
    let x = calibrated_values(data, calibration);
    match options.method {
        FitMethod::MaximumLikelihood => {
            let fit = em_fit(&x, n_max, options.tolerance, options.max_iterations)?;
            DiagonalDensityMatrix::from_weights(&fit.weights)
        }
        FitMethod::Histogram => histogram_fit(&x, n_max).map(|(rho, _)| rho),
    }
}

/// Options shared by every set of a reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionOptions {
    pub n_max: usize,
    pub nbar_backaction: ThermalOccupation,
    pub fit: FitOptions,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self {
            n_max: crate::fock::DEFAULT_N_MAX,
            nbar_backaction: ThermalOccupation::zero(),
            fit: FitOptions::default(),
        }
    }
}

/// Per-set fits under one calibration assumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionFits {
    pub assumption: CalibrationAssumption,
    pub calibrations: Vec<CalibrationResult>,
    pub per_set: Vec<DiagonalDensityMatrix>,
    pub mean: DiagonalDensityMatrix,
}

/// Averaged reconstruction with statistical and systematic uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    /// Squeezed-assumption mean, annotated with `stat_err` and the
    /// systematic bounds.
    pub rho: DiagonalDensityMatrix,
    pub stat_err: Vec<f64>,
    pub sys_lo: Vec<f64>,
    pub sys_hi: Vec<f64>,
    pub n_sets: usize,
    pub squeezed: AssumptionFits,
    pub amplified: AssumptionFits,
}

/// Element-wise mean and standard deviation of the mean.
fn mean_and_sem(sets: &[DiagonalDensityMatrix], n_max: usize) -> (Vec<f64>, Vec<f64>) {
    let m = sets.len() as f64;
    let mut mean = vec![0.0; n_max + 1];
    for rho in sets {
        mean.iter_mut().enumerate().for_each(|(i, x)| *x += rho.population(i) / m);
    }
    let sem = if sets.len() < 2 {
        vec![0.0; n_max + 1]
    } else {
        (0..=n_max)
            .map(|i| {
                let ss: f64 = sets.iter().map(|r| (r.population(i) - mean[i]).powi(2)).sum();
                (ss / (m - 1.0) / m).sqrt()
            })
            .collect()
    };
    (mean, sem)
}

fn fit_assumption(
    photon: &[QuadratureDataset],
    control: &[QuadratureDataset],
    assumption: CalibrationAssumption,
    options: &ReconstructionOptions,
) -> Result<AssumptionFits> {
    let fits: Vec<(CalibrationResult, DiagonalDensityMatrix)> = photon
        .par_iter()
        .zip(control.par_iter())
        .map(|(p, c)| {
            let cal = calibrate_gain(c, assumption, options.nbar_backaction)?;
            let rho = fit_diagonal_with(p, &cal, options.n_max, &options.fit)?;
            Ok((cal, rho))
        })
        .collect::<Result<_>>()?;
    let (calibrations, per_set): (Vec<_>, Vec<_>) = fits.into_iter().unzip();
    let (mean, _) = mean_and_sem(&per_set, options.n_max);
    Ok(AssumptionFits {
        assumption,
        calibrations,
        mean: DiagonalDensityMatrix::from_weights(&mean)?,
        per_set,
    })
}

/// Calibrates and fits every photon set against its paired control set,
/// under both calibration assumptions.
pub fn reconstruct_with_errors(
    photon: &[QuadratureDataset],
    control: &[QuadratureDataset],
    options: &ReconstructionOptions,
) -> Result<ReconstructionResult> {
    if photon.len() != control.len() || photon.len() < 2 {
        return Err(Error::Pairing { photon: photon.len(), control: control.len() });
    }
    let squeezed = fit_assumption(photon, control, CalibrationAssumption::Squeezed, options)?;
    let amplified = fit_assumption(photon, control, CalibrationAssumption::Amplified, options)?;
    let (_, stat_err) = mean_and_sem(&squeezed.per_set, options.n_max);
    let central = squeezed.mean.populations();
    let other = amplified.mean.populations();
    let sys_lo: Vec<f64> = central.iter().zip(other).map(|(a, b)| a.min(*b)).collect();
    let sys_hi: Vec<f64> = central.iter().zip(other).map(|(a, b)| a.max(*b)).collect();
    let rho = squeezed
        .mean
        .clone()
        .with_stat_err(stat_err.clone())?
        .with_sys_bounds(sys_lo.clone(), sys_hi.clone())?;
    Ok(ReconstructionResult { rho, stat_err, sys_lo, sys_hi, n_sets: photon.len(), squeezed, amplified })
}

/// Per-element `(low, high)` over the two calibration pipelines.
pub fn systematic_bounds(result: &ReconstructionResult) -> Vec<(f64, f64)> {
    result.sys_lo.iter().copied().zip(result.sys_hi.iter().copied()).collect()
}

/// `g2(0)` of a reconstruction with its spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Summary {
    pub central: f64,
    /// Standard deviation of the mean over per-set values.
    pub stat_err: f64,
    pub sys_lo: f64,
    pub sys_hi: f64,
    /// The two-photon shorthand `2 rho22 / rho11` of the central matrix.
    pub two_photon_ratio: f64,
}

pub fn g2_summary(result: &ReconstructionResult) -> Result<G2Summary> {
    let central = g2_zero(&result.squeezed.mean)?;
    let amplified = g2_zero(&result.amplified.mean)?;
    let per_set: Vec<f64> = result.squeezed.per_set.iter().filter_map(|r| g2_zero(r).ok()).collect();
    let stat_err = if per_set.len() >= 2 {
        let m = per_set.len() as f64;
        let mean = per_set.iter().sum::<f64>() / m;
        (per_set.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
    } else {
        0.0
    };
    Ok(G2Summary {
        central,
        stat_err,
        sys_lo: central.min(amplified),
        sys_hi: central.max(amplified),
        two_photon_ratio: crate::fock::g2_two_photon_ratio(&result.squeezed.mean)?,
    })
}
