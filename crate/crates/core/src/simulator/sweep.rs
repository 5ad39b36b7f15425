//! Synthetic calibration tables: noise power versus temperature, and qubit
//! dephasing versus JPA gain.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ChainConfig;
use crate::characterization::{dephasing_rate, planck_occupation, SWEEP_FREQUENCY_GHZ};
use crate::error::{Error, Result};
use crate::rng::{stream, substream};

/// One noise-power reading of a thermal sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub gain_db: f64,
    pub temperature_mk: f64,
    /// Input noise power (quanta).
    pub s_in: f64,
    /// Output noise power (quanta times chain gain).
    pub s_out: f64,
    /// One-sigma uncertainty of `s_out`; zero when unknown.
    pub s_out_err: f64,
}

/// One dephasing-rate reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingPoint {
    pub gain_db: f64,
    /// Dephasing rate Gamma / 2pi (kHz).
    pub gamma: f64,
    /// One-sigma uncertainty of `gamma`; zero when unknown.
    pub gamma_err: f64,
}

fn check_gains(gains_db: &[f64]) -> Result<()> {
    match gains_db.iter().find(|g| !(0.0..=40.0).contains(*g)) {
        Some(g) => Err(Error::Domain(format!("gain {g} dB outside [0, 40]"))),
        None => Ok(()),
    }
}

fn check_scatter(scatter: f64) -> Result<()> {
    if scatter >= 0.0 && scatter.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("relative scatter must be >= 0, got {scatter}")))
    }
}

/// Output noise power of the chain at every (gain, temperature) pair, with
/// multiplicative Gaussian scatter. Points are ordered gain-major.
///
/// The chain gain at JPA gain `G_JPA` is `G_JPA * 10^(post_gain_db / 10)`,
/// and the added noise is `n_jpa + n_hemt / G_JPA`.
pub fn simulate_thermal_sweep(
    temperatures_mk: &[f64],
    gains_db: &[f64],
    chain: &ChainConfig,
    scatter: f64,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    check_gains(gains_db)?;
    check_scatter(scatter)?;
    if temperatures_mk.is_empty() || gains_db.is_empty() {
        return Err(Error::Domain("sweep needs at least one gain and one temperature".into()));
    }
    let s_in = temperatures_mk
        .iter()
        .map(|&t| planck_occupation(t, SWEEP_FREQUENCY_GHZ))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = substream(seed, stream::SWEEP, 0);
    let post = 10f64.powf(chain.post_gain_db / 10.0);
    let mut points = Vec::with_capacity(gains_db.len() * temperatures_mk.len());
    for &gain_db in gains_db {
        let g_jpa = 10f64.powf(gain_db / 10.0);
        let n_add = chain.n_jpa + chain.n_hemt / g_jpa;
        for (&temperature_mk, &s) in temperatures_mk.iter().zip(&s_in) {
            let clean = g_jpa * post * (s + n_add);
            let z: f64 = rng.sample(StandardNormal);
            points.push(SweepPoint {
                gain_db,
                temperature_mk,
                s_in: s,
                s_out: clean * (1.0 + scatter * z),
                s_out_err: scatter * clean,
            });
        }
    }
    Ok(points)
}

/// Dephasing rate versus gain from the backaction model, with
/// multiplicative Gaussian scatter. Rates are Gamma / 2pi in kHz.
pub fn simulate_dephasing_data(
    gains_db: &[f64],
    isolation_l: f64,
    gamma0: f64,
    kappa: f64,
    scatter: f64,
    seed: u64,
) -> Result<Vec<DephasingPoint>> {
    check_gains(gains_db)?;
    check_scatter(scatter)?;
    if !(isolation_l >= 0.0 && gamma0 >= 0.0 && kappa > 0.0) {
        return Err(Error::Domain("need L >= 0, gamma0 >= 0 and kappa > 0".into()));
    }
    let mut rng = substream(seed, stream::SWEEP, 1);
    Ok(gains_db
        .iter()
        .map(|&gain_db| {
            let clean = dephasing_rate(isolation_l, gamma0, kappa, gain_db);
            let z: f64 = rng.sample(StandardNormal);
            DephasingPoint { gain_db, gamma: clean * (1.0 + scatter * z), gamma_err: scatter * clean }
        })
        .collect())
}
