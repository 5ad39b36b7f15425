//! End-to-end runs: simulate paired photon/control sets, extract their
//! quadratures and reconstruct the measured state.

use crate::error::Result;
use crate::fock::ThermalOccupation;
use crate::rng::derive_seed;
use crate::simulator::{simulate_quadratures, ChainConfig, ProtocolConfig, SimulatedQuadratures, TrialKind, TrialSimulator};
use crate::temporal_mode::{ModeShapeOptions, QuadratureExtractor};
use crate::tomography::{reconstruct_with_errors, FitOptions, ReconstructionOptions, ReconstructionResult};

/// Seed of measurement set `index`; photon and control sets of one index
/// share it and are separated by their trial kind.
pub fn set_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, "set", index as u64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub n_sets: usize,
    pub trials_per_set: usize,
    pub n_max: usize,
    pub fit: FitOptions,
    pub shape: ModeShapeOptions,
    /// Backaction occupation assumed by the amplified calibration; `None`
    /// takes the chain's configured value.
    pub nbar_backaction: Option<ThermalOccupation>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            n_sets: 8,
            trials_per_set: 7000,
            n_max: crate::fock::DEFAULT_N_MAX,
            fit: FitOptions::default(),
            shape: ModeShapeOptions::default(),
            nbar_backaction: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub photon: Vec<SimulatedQuadratures>,
    pub control: Vec<SimulatedQuadratures>,
    pub result: ReconstructionResult,
}

/// Simulates `n_sets` photon and control sets, extracts them with the
/// emitted mode and reconstructs.
pub fn simulate_and_reconstruct(
    protocol: &ProtocolConfig,
    chain: &ChainConfig,
    options: &PipelineOptions,
    seed: u64,
) -> Result<PipelineRun> {
    let sim = TrialSimulator::with_shape(protocol, chain, &options.shape)?;
    let extractor = sim.matched_extractor().clone();
    simulate_and_reconstruct_with(&sim, &extractor, options, seed)
}

/// As [`simulate_and_reconstruct`], extracting with any extractor.
pub fn simulate_and_reconstruct_with(
    sim: &TrialSimulator,
    extractor: &QuadratureExtractor,
    options: &PipelineOptions,
    seed: u64,
) -> Result<PipelineRun> {
    let mut photon = Vec::with_capacity(options.n_sets);
    let mut control = Vec::with_capacity(options.n_sets);
    for k in 0..options.n_sets {
        let s = set_seed(seed, k);
        let n = options.trials_per_set;
        photon.push(simulate_quadratures(sim, TrialKind::Photon, n, s, extractor, &format!("photon-{k}"))?);
        control.push(simulate_quadratures(sim, TrialKind::Control, n, s, extractor, &format!("control-{k}"))?);
    }
    let reconstruction = ReconstructionOptions {
        n_max: options.n_max,
        nbar_backaction: options.nbar_backaction.unwrap_or_else(|| sim.chain().backaction()),
        fit: options.fit,
    };
    let p: Vec<_> = photon.iter().map(|s| s.data.clone()).collect();
    let c: Vec<_> = control.iter().map(|s| s.data.clone()).collect();
    let result = reconstruct_with_errors(&p, &c, &reconstruction)?;
    Ok(PipelineRun { photon, control, result })
}
