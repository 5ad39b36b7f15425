//! Photon-number (Fock) basis substrate.
//!
//! Every state handled by the toolkit is phase averaged, so only the
//! diagonal of the density matrix is ever represented. Quadratures follow
//! the convention in which one quadrature of the vacuum has variance 1/4,
//! which makes the marginal of `|n><n|`
//!
//! ```text
//! P_n(x) = sqrt(2/pi) / (2^n n!) * H_n(sqrt(2) x)^2 * exp(-2 x^2)
//! ```
//!
//! with `H_n` the physicists' Hermite polynomial. The marginals are evaluated
//! through the normalized Hermite-function recurrence, never through the
//! factorial closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variance of a single vacuum quadrature.
pub const VACUUM_VARIANCE: f64 = 0.25;

/// Largest photon number whose marginal may be evaluated.
pub const MAX_PHOTON_NUMBER: usize = 20;

/// Basis truncation used for fitted matrices unless overridden.
pub const DEFAULT_N_MAX: usize = 3;

/// Basis truncation used for simulated ground-truth states.
pub const SIMULATION_N_MAX: usize = 10;

const NORMALIZATION_TOL: f64 = 1e-9;

/// Mean occupation of a thermal state.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThermalOccupation(f64);

impl ThermalOccupation {
    pub fn new(nbar: f64) -> Result<Self> {
        if !(nbar >= 0.0) || !nbar.is_finite() {
            return Err(Error::Domain(format!("thermal occupation must be >= 0, got {nbar}")));
        }
        Ok(Self(nbar))
    }

    pub const fn zero() -> Self {
        Self(0.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Diagonal of a phase-averaged density matrix in a truncated Fock basis.
///
/// Fitted instances additionally carry a per-element statistical error and
/// optional asymmetric systematic bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDensity")]
pub struct DiagonalDensityMatrix {
    populations: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stat_err: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sys_bounds: Option<(Vec<f64>, Vec<f64>)>,
}

/// Unvalidated serialized form.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDensity {
    populations: Vec<f64>,
    #[serde(default)]
    stat_err: Option<Vec<f64>>,
    #[serde(default)]
    sys_bounds: Option<(Vec<f64>, Vec<f64>)>,
}

impl TryFrom<RawDensity> for DiagonalDensityMatrix {
    type Error = Error;

    fn try_from(raw: RawDensity) -> Result<Self> {
        let mut rho = Self::new(raw.populations)?;
        if let Some(err) = raw.stat_err {
            rho = rho.with_stat_err(err)?;
        }
        if let Some((lo, hi)) = raw.sys_bounds {
            rho = rho.with_sys_bounds(lo, hi)?;
        }
        Ok(rho)
    }
}

impl DiagonalDensityMatrix {
    /// Builds a matrix from populations that must already be normalized.
    pub fn new(populations: Vec<f64>) -> Result<Self> {
        if populations.is_empty() {
            return Err(Error::Domain("density matrix needs at least one population".into()));
        }
        if let Some(p) = populations.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::Domain(format!("population {p} is negative or non-finite")));
        }
        let total: f64 = populations.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Domain(format!("populations sum to {total}, not 1")));
        }
        Ok(Self { populations, stat_err: None, sys_bounds: None })
    }

    /// Normalizes nonnegative weights into a density matrix.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain(format!("weight {w} is negative or non-finite")));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Domain("weights sum to zero".into()));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    /// The Fock state `|n><n|` truncated at `n_max`.
    pub fn fock(n: usize, n_max: usize) -> Result<Self> {
        if n > n_max {
            return Err(Error::Domain(format!("photon number {n} exceeds basis size {n_max}")));
        }
        let mut p = vec![0.0; n_max + 1];
        p[n] = 1.0;
        Self::new(p)
    }

    pub fn vacuum(n_max: usize) -> Self {
        Self::fock(0, n_max).expect("vacuum fits in any basis")
    }

    pub fn with_stat_err(mut self, err: Vec<f64>) -> Result<Self> {
        if err.len() != self.populations.len() {
            return Err(Error::Domain("statistical error length differs from basis".into()));
        }
        self.stat_err = Some(err);
        Ok(self)
    }

    pub fn with_sys_bounds(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let n = self.populations.len();
        if lo.len() != n || hi.len() != n {
            return Err(Error::Domain("systematic bound length differs from basis".into()));
        }
        self.sys_bounds = Some((lo, hi));
        Ok(self)
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    pub fn population(&self, n: usize) -> f64 {
        self.populations.get(n).copied().unwrap_or(0.0)
    }

    pub fn n_max(&self) -> usize {
        self.populations.len() - 1
    }

    pub fn stat_err(&self) -> Option<&[f64]> {
        self.stat_err.as_deref()
    }

    pub fn sys_bounds(&self) -> Option<(&[f64], &[f64])> {
        self.sys_bounds.as_ref().map(|(lo, hi)| (lo.as_slice(), hi.as_slice()))
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.populations.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Zero-pads (or truncates and renormalizes) to a new basis size.
    /// Uncertainty annotations are dropped.
    pub fn resized(&self, n_max: usize) -> Self {
        let mut p = self.populations.clone();
        p.resize(n_max + 1, 0.0);
        if n_max < self.n_max() {
            let total: f64 = p.iter().sum();
            if total > 0.0 {
                p.iter_mut().for_each(|x| *x /= total);
            } else {
                p[0] = 1.0;
            }
        }
        Self { populations: p, stat_err: None, sys_bounds: None }
    }

    /// Flat key/value form: `n_max`, `p0..pN`, then `stat*`, `sys_lo*`,
    /// `sys_hi*` when present.
    pub fn to_record(&self) -> Vec<(String, f64)> {
        let mut rec = vec![("n_max".to_string(), self.n_max() as f64)];
        let push = |rec: &mut Vec<(String, f64)>, prefix: &str, v: &[f64]| {
            rec.extend(v.iter().enumerate().map(|(i, x)| (format!("{prefix}{i}"), *x)));
        };
        push(&mut rec, "p", &self.populations);
        if let Some(s) = &self.stat_err {
            push(&mut rec, "stat", s);
        }
        if let Some((lo, hi)) = &self.sys_bounds {
            push(&mut rec, "sys_lo", lo);
            push(&mut rec, "sys_hi", hi);
        }
        rec
    }

    pub fn from_record<'a, I>(record: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let map: std::collections::HashMap<&str, f64> = record.into_iter().collect();
        let n_max = *map
            .get("n_max")
            .ok_or_else(|| Error::Format("record lacks n_max".into()))?;
        if n_max < 0.0 || n_max.fract() != 0.0 {
            return Err(Error::Format(format!("bad n_max {n_max}")));
        }
        let len = n_max as usize + 1;
        let column = |prefix: &str| -> Result<Option<Vec<f64>>> {
            let found: Vec<Option<f64>> =
                (0..len).map(|i| map.get(format!("{prefix}{i}").as_str()).copied()).collect();
            if found.iter().all(Option::is_none) {
                Ok(None)
            } else if found.iter().all(Option::is_some) {
                Ok(Some(found.into_iter().flatten().collect()))
            } else {
                Err(Error::Format(format!("record has a partial {prefix} column")))
            }
        };
        let p = column("p")?.ok_or_else(|| Error::Format("record lacks populations".into()))?;
        let mut rho = Self::new(p)?;
        if let Some(s) = column("stat")? {
            rho = rho.with_stat_err(s)?;
        }
        match (column("sys_lo")?, column("sys_hi")?) {
            (Some(lo), Some(hi)) => rho = rho.with_sys_bounds(lo, hi)?,
            (None, None) => {}
            _ => return Err(Error::Format("record has only one systematic bound".into())),
        }
        Ok(rho)
    }
}

/// Fills `out[n]` with `P_n(x)` for `n = 0..out.len()`.
///
/// Uses the normalized Hermite-function recurrence
/// `phi_{n+1} = sqrt(2/(n+1)) y phi_n - sqrt(n/(n+1)) phi_{n-1}`, whose
/// iterates stay O(1) so no rescaling by factorials is needed.
pub fn fock_marginals_into(x: f64, out: &mut [f64]) -> Result<()> {
    if out.len() > MAX_PHOTON_NUMBER + 1 {
        return Err(Error::Domain(format!(
            "photon numbers above {MAX_PHOTON_NUMBER} are not supported"
        )));
    }
    if out.is_empty() {
        return Ok(());
    }
    let y = std::f64::consts::SQRT_2 * x;
    // phi_0(y) = pi^{-1/4} exp(-y^2 / 2)
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * y * y).exp();
    for (n, slot) in out.iter_mut().enumerate() {
        *slot = std::f64::consts::SQRT_2 * cur * cur;
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * y * cur - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    Ok(())
}

/// `P_n(x)` for `n = 0..=n_max`.
pub fn fock_marginals(x: f64, n_max: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n_max + 1];
    fock_marginals_into(x, &mut out)?;
    Ok(out)
}

/// Quadrature marginal of the Fock state `|n>`.
pub fn fock_marginal_pdf(n: usize, x: f64) -> Result<f64> {
    if n > MAX_PHOTON_NUMBER {
        return Err(Error::Domain(format!(
            "photon number {n} exceeds supported maximum {MAX_PHOTON_NUMBER}"
        )));
    }
    let mut buf = [0.0; MAX_PHOTON_NUMBER + 1];
    fock_marginals_into(x, &mut buf[..=n])?;
    Ok(buf[n])
}

/// Quadrature density of a phase-averaged state.
pub fn mixture_pdf(rho: &DiagonalDensityMatrix, x: f64) -> Result<f64> {
    let p = fock_marginals(x, rho.n_max())?;
    Ok(rho.populations().iter().zip(&p).map(|(w, q)| w * q).sum())
}

fn check_probability(name: &str, t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("{name} must lie in [0, 1], got {t}")));
    }
    Ok(())
}

/// Pure-loss channel of the given transmissivity acting on a diagonal state:
/// each photon independently survives with probability `t`.
pub fn loss_channel(rho: &DiagonalDensityMatrix, transmissivity: f64) -> Result<DiagonalDensityMatrix> {
    check_probability("transmissivity", transmissivity)?;
    let p = rho.populations();
    let mut out = vec![0.0; p.len()];
    let r = 1.0 - transmissivity;
    for (n, &pn) in p.iter().enumerate() {
        if pn == 0.0 {
            continue;
        }
        // binomial row C(n, m) t^m r^(n-m), built incrementally
        let mut c = 1.0;
        for (m, slot) in out.iter_mut().enumerate().take(n + 1) {
            if m > 0 {
                c *= (n + 1 - m) as f64 / m as f64;
            }
            *slot += pn * c * transmissivity.powi(m as i32) * r.powi((n - m) as i32);
        }
    }
    // renormalize away rounding so the result satisfies the invariant exactly
    DiagonalDensityMatrix::from_weights(&out)
}

/// Thermal state `rho_n = nbar^n / (nbar + 1)^(n+1)`, truncated at `n_max`
/// and renormalized.
pub fn thermal_state(nbar: ThermalOccupation, n_max: usize) -> DiagonalDensityMatrix {
    let nbar = nbar.value();
    let ratio = nbar / (nbar + 1.0);
    let mut w = Vec::with_capacity(n_max + 1);
    let mut term = 1.0 / (nbar + 1.0);
    for _ in 0..=n_max {
        w.push(term);
        term *= ratio;
    }
    DiagonalDensityMatrix::from_weights(&w).expect("thermal weights are positive")
}

/// Smallest truncation whose discarded thermal tail is below `tail`.
pub fn thermal_cutoff(nbar: ThermalOccupation, tail: f64) -> usize {
    let ratio = nbar.value() / (nbar.value() + 1.0);
    if ratio == 0.0 {
        return 0;
    }
    // discarded mass beyond n_max is ratio^(n_max + 1)
    let n = (tail.ln() / ratio.ln()).ceil() - 1.0;
    n.max(0.0) as usize
}

/// Fidelity of two commuting states: the Bhattacharyya sum of populations.
/// The shorter basis is zero-padded.
pub fn fidelity_diagonal(a: &DiagonalDensityMatrix, b: &DiagonalDensityMatrix) -> f64 {
    let n = a.populations().len().max(b.populations().len());
    let f: f64 = (0..n).map(|i| (a.population(i) * b.population(i)).sqrt()).sum();
    f.clamp(0.0, 1.0)
}

/// Zero-delay intensity correlation `sum n(n-1) rho_n / (sum n rho_n)^2`.
pub fn g2_zero(rho: &DiagonalDensityMatrix) -> Result<f64> {
    let mean = rho.mean_photon_number();
    if !(mean > 0.0) {
        return Err(Error::Undefined("g2(0) of a state with zero mean photon number".into()));
    }
    let second: f64 = rho
        .populations()
        .iter()
        .enumerate()
        .map(|(n, p)| (n * n.saturating_sub(1)) as f64 * p)
        .sum();
    Ok(second / (mean * mean))
}

/// The two-photon shorthand `2 rho_22 / rho_11`.
pub fn g2_two_photon_ratio(rho: &DiagonalDensityMatrix) -> Result<f64> {
    let p1 = rho.population(1);
    if !(p1 > 0.0) {
        return Err(Error::Undefined("2 rho22 / rho11 with empty single-photon population".into()));
    }
    Ok(2.0 * rho.population(2) / p1)
}

/// The state expected at the detector if the cavity held exactly one photon:
/// `{1 - (kappa_out/kappa) eta, (kappa_out/kappa) eta}`.
pub fn expected_measured_state(kappa: f64, kappa_out: f64, eta_m: f64) -> Result<DiagonalDensityMatrix> {
    if !(kappa_out > 0.0 && kappa_out <= kappa) {
        return Err(Error::Domain(format!(
            "need 0 < kappa_out <= kappa, got kappa_out = {kappa_out}, kappa = {kappa}"
        )));
    }
    check_probability("efficiency", eta_m)?;
    let one = kappa_out / kappa * eta_m;
    DiagonalDensityMatrix::new(vec![1.0 - one, one])
}

/// Exact sampler for the quadrature marginals `P_n`, `n <= n_max`.
///
/// Rejection sampling from a Gaussian envelope with the marginal's own
/// variance `(2n + 1)/4`. For `n >= 1` the ratio `P_n / envelope` decays in
/// the tails, so its supremum is found on a bounded grid.
#[derive(Debug, Clone)]
pub struct MarginalSampler {
    envelopes: Vec<(f64, f64)>,
}

impl MarginalSampler {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max > MAX_PHOTON_NUMBER {
            return Err(Error::Domain(format!(
                "photon number {n_max} exceeds supported maximum {MAX_PHOTON_NUMBER}"
            )));
        }
        let mut envelopes = Vec::with_capacity(n_max + 1);
        let mut buf = vec![0.0; n_max + 1];
        let mut sup = vec![0.0f64; n_max + 1];
        let steps = 40_000;
        for i in 0..=steps {
            let x = 16.0 * i as f64 / steps as f64;
            fock_marginals_into(x, &mut buf)?;
            for (n, p) in buf.iter().enumerate() {
                let sd = ((2 * n + 1) as f64 / 4.0).sqrt();
                let g = gaussian_pdf(x, sd);
                if g > 0.0 {
                    sup[n] = sup[n].max(p / g);
                }
            }
        }
        for (n, s) in sup.iter().enumerate() {
            let sd = ((2 * n + 1) as f64 / 4.0).sqrt();
            let bound = if n == 0 { 1.0 + 1e-12 } else { s * 1.01 };
            envelopes.push((sd, bound));
        }
        Ok(Self { envelopes })
    }

    pub fn n_max(&self) -> usize {
        self.envelopes.len() - 1
    }

    /// Draws one quadrature value of `|n>`.
    pub fn sample<R: rand::Rng + ?Sized>(&self, n: usize, rng: &mut R) -> f64 {
        let (sd, bound) = self.envelopes[n];
        if n == 0 {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            return sd * z;
        }
        loop {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            let x = sd * z;
            let u: f64 = rng.random();
            let p = fock_marginal_pdf(n, x).expect("n checked at construction");
            if u * bound * gaussian_pdf(x, sd) <= p {
                return x;
            }
        }
    }

    /// Draws a photon number from `rho` and then a quadrature value.
    pub fn sample_state<R: rand::Rng + ?Sized>(&self, rho: &DiagonalDensityMatrix, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut n = rho.n_max();
        for (k, p) in rho.populations().iter().enumerate() {
            acc += p;
            if u < acc {
                n = k;
                break;
            }
        }
        self.sample(n.min(self.n_max()), rng)
    }
}

fn gaussian_pdf(x: f64, sd: f64) -> f64 {
    (-0.5 * (x / sd).powi(2)).exp() / (sd * (std::f64::consts::TAU).sqrt())
}
