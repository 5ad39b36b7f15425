//! Monte-Carlo generator of synthetic measurement-chain data.
//!
//! A trial follows the branching model of the generation protocol:
//!
//! 1. the qubit starts excited with probability `p_excited_init`;
//! 2. thermal backaction photons (occupation `L (G - 1) / 4`) join the one
//!    photon the sideband pulse puts in the cavity (none for control trials);
//! 3. the pulse fails with probability `p_pulse_fail`;
//! 4. the qubit may decay before the photon leaves, in which case that photon
//!    is emitted at another frequency and does not reach the measured mode;
//! 5. every remaining cavity photon leaves through the output port with
//!    probability `kappa_out / kappa`;
//! 6. one quadrature of the emitted Fock state is drawn from its marginal,
//!    amplified into the mode function, and buried in white amplifier noise
//!    and a slowly drifting dc offset.
//!
//! Readout results are ideal; post-selection keeps trials that start in the
//! ground state and end excited.

use rand::{Rng, SeedableRng};
use rand_distr::{Binomial, Distribution, Geometric, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    loss_channel, thermal_cutoff, thermal_state, DiagonalDensityMatrix, MarginalSampler, ThermalOccupation,
    MAX_PHOTON_NUMBER,
};
use crate::rng::{stream, substream};
use crate::temporal_mode::{
    background_window, mode_shape_with, ModeShapeOptions, QuadratureExtractor, TemporalMode, TemporalModeParams,
    TraceGrid, VoltageTrace, WindowFunction,
};
use crate::tomography::QuadratureDataset;

mod sweep;

pub use sweep::{simulate_dephasing_data, simulate_thermal_sweep, DephasingPoint, SweepPoint};

/// Retention the default split reproduces after the pulse: 74 %.
const DEFAULT_POST_PULSE_RETENTION: f64 = 0.74;

/// Generation-protocol parameters and timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Qubit energy relaxation time (µs).
    pub t1_qubit: f64,
    pub p_excited_init: f64,
    /// Failure probability of the sideband pulse, beyond qubit decay.
    pub p_pulse_fail: f64,
    /// Blue-sideband pi-pulse length (ns).
    pub drive_duration: f64,
    /// Total cavity decay rate, kappa / 2pi (kHz).
    pub kappa: f64,
    /// Output-port decay rate, kappa_out / 2pi (kHz).
    pub kappa_out: f64,
    /// Spectroscopic metadata; never used in the dynamics.
    pub qubit_freq: f64,
    pub cavity_freq: f64,
    pub chi: f64,
    pub grid: TraceGrid,
    /// Qubit readout windows (µs from trace start).
    pub readout_intervals: Vec<(f64, f64)>,
    /// Height of the rendered readout plateaus (V).
    pub readout_level: f64,
    /// Time between consecutive trials (µs), which sets how far the dc
    /// offset drifts from one trial to the next.
    pub repetition_period: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        let mut p = Self {
            t1_qubit: 10.0,
            p_excited_init: 0.06,
            p_pulse_fail: 0.0,
            drive_duration: 150.0,
            kappa: 410.0,
            kappa_out: 300.0,
            qubit_freq: 3.495,
            cavity_freq: 5.804,
            chi: -1.0,
            grid: TraceGrid::default(),
            readout_intervals: vec![(1.0, 3.0), (30.0, 32.0)],
            readout_level: 0.5,
            repetition_period: 100.0,
        };
        p.p_pulse_fail = p.pulse_fail_for_retention(DEFAULT_POST_PULSE_RETENTION);
        p
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_excited_init", self.p_excited_init), ("p_pulse_fail", self.p_pulse_fail)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("{name} must be a probability, got {p}")));
            }
        }
        if !(self.kappa_out > 0.0 && self.kappa_out <= self.kappa) {
            return Err(Error::Domain(format!(
                "need 0 < kappa_out <= kappa, got {} and {}",
                self.kappa_out, self.kappa
            )));
        }
        if !(self.t1_qubit > 0.0) {
            return Err(Error::Domain("T1 must be positive".into()));
        }
        if !(self.drive_duration >= 0.0) || !(self.repetition_period > 0.0) {
            return Err(Error::Domain("drive duration and repetition period must be positive".into()));
        }
        self.grid.validate()
    }

    /// Photon escape probability `kappa_out / kappa`.
    pub fn escape_probability(&self) -> f64 {
        self.kappa_out / self.kappa
    }

    /// Probability that the qubit decays before the cavity photon leaves:
    /// the exponential race `gamma_1 / (gamma_1 + kappa)`.
    pub fn decay_probability(&self) -> f64 {
        let gamma1 = 1.0 / self.t1_qubit;
        let kappa = std::f64::consts::TAU * self.kappa * 1e-3;
        gamma1 / (gamma1 + kappa)
    }

    /// Pulse-failure probability that, combined with the decay race, leaves
    /// the requested post-pulse retention.
    pub fn pulse_fail_for_retention(&self, retention: f64) -> f64 {
        (1.0 - retention / (1.0 - self.decay_probability())).clamp(0.0, 1.0)
    }

    /// Probability that a trial starting in the ground state survives the
    /// post-pulse selection.
    pub fn post_pulse_retention(&self) -> f64 {
        (1.0 - self.p_pulse_fail) * (1.0 - self.decay_probability())
    }
}

/// Slowly drifting dc offset, an Ornstein–Uhlenbeck process sampled once per
/// trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DcDrift {
    /// Stationary standard deviation (V).
    pub amplitude: f64,
    /// Correlation time (µs).
    pub correlation_time: f64,
}

impl Default for DcDrift {
    fn default() -> Self {
        Self { amplitude: 0.08, correlation_time: 200.0 }
    }
}

/// Amplification chain parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    /// JPA power gain (dB).
    pub g_jpa_db: f64,
    /// JPA added noise, referred to its input (quanta).
    pub n_jpa: f64,
    /// Downstream added noise, referred to the HEMT input (quanta).
    pub n_hemt: f64,
    /// Fraction of JPA output leaking back into the cavity.
    pub isolation_l: f64,
    /// Trace volts per unit quadrature at the chain input.
    pub apparatus_gain: f64,
    pub dc_drift: DcDrift,
    /// JPA gain-bandwidth product (MHz, amplitude gain times bandwidth).
    pub gain_bandwidth: f64,
    /// Gain after the JPA seen by the noise-power sweep (dB).
    pub post_gain_db: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            g_jpa_db: 29.0,
            n_jpa: 0.39,
            n_hemt: 18.0,
            isolation_l: 2.1e-4,
            apparatus_gain: 1.0,
            dc_drift: DcDrift::default(),
            gain_bandwidth: 43.0,
            post_gain_db: 0.0,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=40.0).contains(&self.g_jpa_db) {
            return Err(Error::Domain(format!("JPA gain {} dB outside [0, 40]", self.g_jpa_db)));
        }
        if !(self.isolation_l >= 0.0) {
            return Err(Error::Domain("isolation leakage must be >= 0".into()));
        }
        if !(self.apparatus_gain > 0.0) {
            return Err(Error::Domain("apparatus gain must be > 0".into()));
        }
        if !(self.n_jpa >= 0.0 && self.n_hemt >= 0.0) {
            return Err(Error::Domain("added noise must be >= 0".into()));
        }
        if !(self.dc_drift.amplitude >= 0.0 && self.dc_drift.correlation_time > 0.0) {
            return Err(Error::Domain("dc drift needs amplitude >= 0 and a positive correlation time".into()));
        }
        if !(self.gain_bandwidth > 0.0) {
            return Err(Error::Domain("gain-bandwidth product must be > 0".into()));
        }
        Ok(())
    }

    pub fn g_jpa(&self) -> f64 {
        10f64.powf(self.g_jpa_db / 10.0)
    }

    /// `N_JPA + N_HEMT / G_JPA`.
    pub fn added_noise(&self) -> f64 {
        self.n_jpa + self.n_hemt / self.g_jpa()
    }

    /// `1 / (2 N_add + 1)`.
    pub fn efficiency(&self) -> f64 {
        1.0 / (2.0 * self.added_noise() + 1.0)
    }

    /// Backaction occupation `L (G - 1) / 4`.
    pub fn backaction(&self) -> ThermalOccupation {
        ThermalOccupation::new(0.25 * self.isolation_l * (self.g_jpa() - 1.0)).expect("validated chain")
    }

    /// Shape parameters of the mode the emitted photon occupies.
    pub fn emitted_mode(&self, protocol: &ProtocolConfig) -> TemporalModeParams {
        TemporalModeParams::from_gain_bandwidth(
            protocol.drive_duration,
            protocol.kappa,
            self.gain_bandwidth,
            self.g_jpa_db,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialKind {
    /// Sideband pi-pulse: one photon intended.
    Photon,
    /// Qubit pi-pulse: no photon intended.
    Control,
}

impl TrialKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Photon => "photon",
            Self::Control => "control",
        }
    }

    fn index(self) -> u64 {
        match self {
            Self::Photon => 0,
            Self::Control => 1,
        }
    }
}

/// Hidden branch outcomes of a simulated trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialTruth {
    pub initial_excited: bool,
    pub pulse_failed: bool,
    pub qubit_decayed: bool,
    pub backaction_photons: u32,
    /// Photons that reached the measured output mode.
    pub emitted_n: u32,
    /// Quadrature drawn for the emitted state, before amplification.
    pub quadrature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trace: VoltageTrace,
    pub pre_readout_ground: bool,
    pub post_readout_excited: bool,
    pub kind: TrialKind,
    pub truth: TrialTruth,
}

impl TrialRecord {
    pub fn retained(&self) -> bool {
        self.pre_readout_ground && self.post_readout_excited
    }
}

/// Retention bookkeeping of a simulated set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PostSelectionTally {
    pub total: usize,
    pub retained: usize,
    /// Rejected by the pre-pulse readout (qubit started excited).
    pub rejected_initial_excited: usize,
    /// Rejected by the post-pulse readout after a failed pulse.
    pub rejected_pulse_failure: usize,
    /// Rejected by the post-pulse readout after qubit decay.
    pub rejected_qubit_decay: usize,
}

impl PostSelectionTally {
    fn record(&mut self, r: &TrialRecord) {
        self.total += 1;
        if !r.pre_readout_ground {
            self.rejected_initial_excited += 1;
        } else if !r.post_readout_excited {
            if r.truth.pulse_failed {
                self.rejected_pulse_failure += 1;
            } else {
                self.rejected_qubit_decay += 1;
            }
        } else {
            self.retained += 1;
        }
    }

    pub fn retained_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.retained as f64 / self.total as f64
        }
    }
}

/// Precomputed state for generating trials of one configuration.
#[derive(Debug, Clone)]
pub struct TrialSimulator {
    protocol: ProtocolConfig,
    chain: ChainConfig,
    mode: TemporalMode,
    window: WindowFunction,
    extractor: QuadratureExtractor,
    sampler: MarginalSampler,
    noise_sd: f64,
    readout_ranges: Vec<std::ops::Range<usize>>,
}

impl TrialSimulator {
    pub fn new(protocol: &ProtocolConfig, chain: &ChainConfig) -> Result<Self> {
        Self::with_shape(protocol, chain, &ModeShapeOptions::default())
    }

    pub fn with_shape(protocol: &ProtocolConfig, chain: &ChainConfig, shape: &ModeShapeOptions) -> Result<Self> {
        protocol.validate()?;
        chain.validate()?;
        let grid = protocol.grid;
        let mode = mode_shape_with(&chain.emitted_mode(protocol), &grid, shape)?;
        let window = background_window(&grid, &protocol.readout_intervals)?;
        let extractor = QuadratureExtractor::new(&mode, &window)?;
        // white noise that, after extraction with the emitted mode, adds
        // N_add / 2 quadrature units of variance
        let target = chain.apparatus_gain.powi(2) * chain.added_noise() / 2.0;
        let noise_sd = (target / extractor.white_noise_variance(1.0)).sqrt();
        let readout_ranges =
            protocol.readout_intervals.iter().map(|&(a, b)| grid.index_range(a, b)).collect();
        Ok(Self {
            protocol: protocol.clone(),
            chain: *chain,
            mode,
            window,
            extractor,
            sampler: MarginalSampler::new(MAX_PHOTON_NUMBER)?,
            noise_sd,
            readout_ranges,
        })
    }

    pub fn protocol(&self) -> &ProtocolConfig {
        &self.protocol
    }

    pub fn chain(&self) -> &ChainConfig {
        &self.chain
    }

    pub fn mode(&self) -> &TemporalMode {
        &self.mode
    }

    pub fn window(&self) -> &WindowFunction {
        &self.window
    }

    /// Extractor built from the emitted mode and the configured window.
    pub fn matched_extractor(&self) -> &QuadratureExtractor {
        &self.extractor
    }

    /// Per-sample standard deviation of the white trace noise (V).
    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    /// Draws the branch outcomes of one trial.
    pub fn draw_truth<R: Rng + ?Sized>(&self, kind: TrialKind, rng: &mut R) -> TrialTruth {
        let p = &self.protocol;
        let initial_excited = rng.random::<f64>() < p.p_excited_init;
        let nbar = self.chain.backaction().value();
        let backaction_photons = if nbar > 0.0 {
            let g = Geometric::new(1.0 / (1.0 + nbar)).expect("valid geometric parameter");
            g.sample(rng).min(MAX_PHOTON_NUMBER as u64) as u32
        } else {
            0
        };
        let pulse_failed = rng.random::<f64>() < p.p_pulse_fail;
        let decay_draw = rng.random::<f64>() < p.decay_probability();

        // qubit state after the pulse, and whether the intended photon exists
        let (excited, mut intended) = match (kind, initial_excited, pulse_failed) {
            (_, _, true) => (initial_excited, 0),
            (TrialKind::Photon, false, false) => (true, 1),
            (TrialKind::Photon, true, false) => (true, 0),
            (TrialKind::Control, e, false) => (!e, 0),
        };
        let qubit_decayed = excited && decay_draw;
        if qubit_decayed {
            // the sideband photon leaves at the wrong frequency
            intended = 0;
        }
        let in_cavity = backaction_photons + intended;
        let emitted_n = if in_cavity == 0 {
            0
        } else {
            Binomial::new(in_cavity as u64, p.escape_probability())
                .expect("valid binomial parameters")
                .sample(rng) as u32
        };
        TrialTruth { initial_excited, pulse_failed, qubit_decayed, backaction_photons, emitted_n, quadrature: 0.0 }
    }

    fn final_excited(kind: TrialKind, t: &TrialTruth) -> bool {
        let after_pulse = match (kind, t.pulse_failed) {
            (_, true) => t.initial_excited,
            (TrialKind::Photon, false) => true,
            (TrialKind::Control, false) => !t.initial_excited,
        };
        after_pulse && !t.qubit_decayed
    }

    /// Simulates one trial. `drift` is the dc offset of this trial.
    pub fn simulate_trial<R: Rng + ?Sized, N: Rng + ?Sized>(
        &self,
        kind: TrialKind,
        drift: f64,
        rng: &mut R,
        noise_rng: &mut N,
    ) -> TrialRecord {
        let mut truth = self.draw_truth(kind, rng);
        let x = self.sampler.sample(truth.emitted_n as usize, rng);
        truth.quadrature = x;
        let post_excited = Self::final_excited(kind, &truth);
        let amplitude = self.chain.apparatus_gain * x;
        let mut samples: Vec<f64> = self
            .mode
            .samples()
            .iter()
            .map(|f| {
                let z: f64 = noise_rng.sample(StandardNormal);
                amplitude * f + self.noise_sd * z + drift
            })
            .collect();
        let level = self.protocol.readout_level;
        for (k, range) in self.readout_ranges.iter().enumerate() {
            let excited = if k == 0 { truth.initial_excited } else { post_excited };
            let plateau = if excited { level } else { -level };
            samples[range.clone()].iter_mut().for_each(|s| *s += plateau);
        }
        TrialRecord {
            trace: VoltageTrace { grid: self.protocol.grid, samples },
            pre_readout_ground: !truth.initial_excited,
            post_readout_excited: post_excited,
            kind,
            truth,
        }
    }

    /// dc offsets for `n` consecutive trials.
    pub fn drift_sequence(&self, n: usize, seed: u64, set_stream: u64) -> Vec<f64> {
        let d = self.chain.dc_drift;
        let mut rng = substream(seed, stream::DRIFT, set_stream);
        let rho = (-self.protocol.repetition_period / d.correlation_time).exp();
        let kick = d.amplitude * (1.0 - rho * rho).sqrt();
        let mut current = d.amplitude * rng.sample::<f64, _>(StandardNormal);
        (0..n)
            .map(|_| {
                let out = current;
                current = rho * current + kick * rng.sample::<f64, _>(StandardNormal);
                out
            })
            .collect()
    }

    /// Generates `n_trials` trials in parallel chunks and hands every record,
    /// in trial order, to `sink`.
    pub fn simulate_stream<F>(&self, kind: TrialKind, n_trials: usize, seed: u64, mut sink: F) -> Result<PostSelectionTally>
    where
        F: FnMut(TrialRecord) -> Result<()>,
    {
        if n_trials == 0 {
            return Err(Error::Domain("need at least one trial".into()));
        }
        const CHUNK: usize = 512;
        let drift = self.drift_sequence(n_trials, seed, kind.index());
        let mut tally = PostSelectionTally::default();
        for start in (0..n_trials).step_by(CHUNK) {
            let end = (start + CHUNK).min(n_trials);
            let records: Vec<TrialRecord> = (start..end)
                .into_par_iter()
                .map(|i| {
                    let id = (kind.index() << 40) | i as u64;
                    let mut rng = substream(seed, stream::TRIAL, id);
                    let mut noise = substream(seed, stream::NOISE, id);
                    self.simulate_trial(kind, drift[i], &mut rng, &mut noise)
                })
                .collect();
            for r in records {
                tally.record(&r);
                sink(r)?;
            }
        }
        Ok(tally)
    }

    /// Phase-averaged state reaching the detector on retained trials,
    /// truncated at `n_max`.
    pub fn analytic_emitted_state(&self, kind: TrialKind, n_max: usize) -> DiagonalDensityMatrix {
        let nbar = self.chain.backaction();
        let cut = thermal_cutoff(nbar, 1e-14).max(n_max);
        let thermal = thermal_state(nbar, cut);
        let cavity = match kind {
            TrialKind::Control => thermal,
            TrialKind::Photon => {
                let mut p = vec![0.0];
                p.extend_from_slice(thermal.populations());
                DiagonalDensityMatrix::from_weights(&p).expect("shifted thermal state")
            }
        };
        loss_channel(&cavity, self.protocol.escape_probability())
            .expect("escape probability validated")
            .resized(n_max)
    }

    /// Expected retained fraction of a set; the same for both kinds.
    pub fn analytic_retention(&self, _kind: TrialKind) -> f64 {
        let p = &self.protocol;
        (1.0 - p.p_excited_init) * p.post_pulse_retention()
    }
}

/// Simulates one trial with a stationary drift draw.
pub fn simulate_trial<R: Rng>(
    kind: TrialKind,
    protocol: &ProtocolConfig,
    chain: &ChainConfig,
    rng: &mut R,
) -> Result<TrialRecord> {
    let sim = TrialSimulator::new(protocol, chain)?;
    let drift = chain.dc_drift.amplitude * rng.sample::<f64, _>(StandardNormal);
    let mut noise = rand_chacha::ChaCha8Rng::from_rng(rng);
    Ok(sim.simulate_trial(kind, drift, rng, &mut noise))
}

/// A simulated measurement set: every trial, plus the post-selection tally.
#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub kind: TrialKind,
    pub seed: u64,
    pub grid: TraceGrid,
    pub records: Vec<TrialRecord>,
    pub tally: PostSelectionTally,
}

impl SimulatedDataset {
    pub fn retained(&self) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().filter(|r| r.retained())
    }

    pub fn retained_traces(&self) -> Vec<VoltageTrace> {
        self.retained().map(|r| r.trace.clone()).collect()
    }

    /// Extracts the post-selected quadratures with the given extractor.
    pub fn quadratures(&self, extractor: &QuadratureExtractor, set_id: &str) -> Result<QuadratureDataset> {
        let values = self.retained().map(|r| extractor.extract(&r.trace)).collect::<Result<Vec<_>>>()?;
        QuadratureDataset::uncalibrated(set_id, values)
    }
}

/// Simulates a full set and keeps every trace.
pub fn simulate_dataset(
    kind: TrialKind,
    n_trials: usize,
    protocol: &ProtocolConfig,
    chain: &ChainConfig,
    seed: u64,
) -> Result<SimulatedDataset> {
    let sim = TrialSimulator::new(protocol, chain)?;
    let mut records = Vec::with_capacity(n_trials);
    let tally = sim.simulate_stream(kind, n_trials, seed, |r| {
        records.push(r);
        Ok(())
    })?;
    if tally.retained == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(SimulatedDataset { kind, seed, grid: protocol.grid, records, tally })
}

/// Post-selected quadratures of one simulated set, without keeping traces.
#[derive(Debug, Clone)]
pub struct SimulatedQuadratures {
    pub data: QuadratureDataset,
    /// `emitted_n` of each retained trial, aligned with `data`.
    pub truth_emitted: Vec<u32>,
    pub tally: PostSelectionTally,
}

/// Streams a set through `extractor` and returns only the retained values.
pub fn simulate_quadratures(
    sim: &TrialSimulator,
    kind: TrialKind,
    n_trials: usize,
    seed: u64,
    extractor: &QuadratureExtractor,
    set_id: &str,
) -> Result<SimulatedQuadratures> {
    let mut values = Vec::new();
    let mut truth = Vec::new();
    let tally = sim.simulate_stream(kind, n_trials, seed, |r| {
        if r.retained() {
            values.push(extractor.extract(&r.trace)?);
            truth.push(r.truth.emitted_n);
        }
        Ok(())
    })?;
    if values.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(SimulatedQuadratures {
        data: QuadratureDataset::uncalibrated(set_id, values)?,
        truth_emitted: truth,
        tally,
    })
}
