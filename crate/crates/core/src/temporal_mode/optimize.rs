//! Mode-function optimization: choose the shape parameters that minimize the
//! vacuum population reconstructed from a held-out photon/control pair.

use rayon::prelude::*;

use super::{inner, mode_shape_with, ModeShapeOptions, TemporalModeParams, VoltageTrace, WindowFunction};
use crate::error::{Error, Result};
use crate::fock::{ThermalOccupation, DEFAULT_N_MAX};
use crate::nelder_mead::{self, NelderMeadOptions};
use crate::tomography::{calibrate_gain, fit_diagonal_with, CalibrationAssumption, FitOptions, QuadratureDataset};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    pub simplex: NelderMeadOptions,
    pub shape: ModeShapeOptions,
    pub n_max: usize,
    pub nbar_backaction: ThermalOccupation,
    pub fit: FitOptions,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            simplex: NelderMeadOptions::default(),
            shape: ModeShapeOptions::default(),
            n_max: DEFAULT_N_MAX,
            nbar_backaction: ThermalOccupation::zero(),
            fit: FitOptions::default(),
        }
    }
}

/// A trace reduced to what any mode with the configured support needs:
/// its projection on the background window and the samples under the
/// mode support.
#[derive(Debug, Clone)]
struct ReducedTrace {
    on_window: f64,
    segment: Vec<f64>,
}

/// Vacuum population of the reconstruction as a function of the mode
/// parameters, for fixed held-out data.
#[derive(Debug, Clone)]
pub struct ModeObjective {
    window: WindowFunction,
    options: OptimizeOptions,
    support: std::ops::Range<usize>,
    photon: Vec<ReducedTrace>,
    control: Vec<ReducedTrace>,
}

impl ModeObjective {
    pub fn new(
        photon: &[VoltageTrace],
        control: &[VoltageTrace],
        window: &WindowFunction,
        options: OptimizeOptions,
    ) -> Result<Self> {
        if photon.is_empty() || control.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let grid = *window.grid();
        let support = options.shape.support_range(&grid);
        let reduce = |traces: &[VoltageTrace]| -> Result<Vec<ReducedTrace>> {
            traces
                .par_iter()
                .map(|t| {
                    if !t.grid.same_as(&grid) {
                        return Err(Error::GridMismatch("held-out trace grid differs from window grid".into()));
                    }
                    Ok(ReducedTrace {
                        on_window: inner(&t.samples, window.samples(), grid.dt),
                        segment: t.samples[support.clone()].to_vec(),
                    })
                })
                .collect()
        };
        Ok(Self {
            window: window.clone(),
            options,
            support: support.clone(),
            photon: reduce(photon)?,
            control: reduce(control)?,
        })
    }

    fn quadratures(&self, traces: &[ReducedTrace], f: &[f64], overlap: f64, dt: f64) -> Vec<f64> {
        let denom = 1.0 - overlap * overlap;
        traces
            .par_iter()
            .map(|t| (inner(&t.segment, f, dt) - t.on_window * overlap) / denom)
            .collect()
    }

    /// Reconstructed vacuum population for one parameter triple.
    pub fn rho00(&self, params: &TemporalModeParams) -> Result<f64> {
        let grid = *self.window.grid();
        let mode = mode_shape_with(params, &grid, &self.options.shape)?;
        let overlap = inner(mode.samples(), self.window.samples(), grid.dt);
        if 1.0 - overlap * overlap < 1e-12 {
            return Err(Error::Singular { overlap });
        }
        let f = &mode.samples()[self.support.clone()];
        let control = QuadratureDataset::uncalibrated("held-out control", self.quadratures(&self.control, f, overlap, grid.dt))?;
        let photon = QuadratureDataset::uncalibrated("held-out photon", self.quadratures(&self.photon, f, overlap, grid.dt))?;
        let cal = calibrate_gain(&control, CalibrationAssumption::Squeezed, self.options.nbar_backaction)?;
        let rho = fit_diagonal_with(&photon, &cal, self.options.n_max, &self.options.fit)?;
        Ok(rho.population(0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeOptimization {
    pub params: TemporalModeParams,
    pub rho00: f64,
    pub initial_rho00: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best parameters and objective after each simplex iteration.
    pub trace: Vec<(TemporalModeParams, f64)>,
}

/// Simplex search over (rise time, decay rate, bandwidth) minimizing the
/// reconstructed vacuum population of held-out data.
pub fn optimize_mode(
    photon: &[VoltageTrace],
    control: &[VoltageTrace],
    window: &WindowFunction,
    initial: &TemporalModeParams,
    options: &OptimizeOptions,
) -> Result<ModeOptimization> {
    initial.validate()?;
    let objective = ModeObjective::new(photon, control, window, *options)?;
    let initial_rho00 = objective.rho00(initial)?;
    let f = |x: &[f64]| -> f64 {
        objective.rho00(&TemporalModeParams::from_slice(x)).unwrap_or(f64::INFINITY)
    };
    let result = nelder_mead::minimize(f, &initial.to_vec(), &options.simplex)?;
    let (params, rho00) = if result.f <= initial_rho00 {
        (TemporalModeParams::from_slice(&result.x), result.f)
    } else {
        (*initial, initial_rho00)
    };
    Ok(ModeOptimization {
        params,
        rho00,
        initial_rho00,
        iterations: result.iterations,
        evaluations: result.evaluations + 1,
        trace: result
            .history
            .into_iter()
            .map(|(x, f)| (TemporalModeParams::from_slice(&x), f))
            .collect(),
    })
}
