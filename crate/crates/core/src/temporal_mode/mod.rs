//! Temporal mode matching and single-trace quadrature extraction.
//!
//! A trace `V(t)` is modelled as `V_q f(t) + V_dc b(t)` plus noise, where
//! `f` is the unit-norm mode function of the emitted photon and `b` the
//! unit-norm background window. The least-squares pair `(V_q, V_dc)` has the
//! closed form
//!
//! ```text
//! V_q = (<V,f> - <V,b><b,f>) / (1 - <f,b>^2)
//! ```
//!
//! All inner products are time integrals, `<a,b> = dt * sum a_i b_i`, with
//! time in microseconds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod optimize;

pub use optimize::{optimize_mode, ModeObjective, ModeOptimization, OptimizeOptions};

/// Sampling grid shared by every trace of a data set. Times are in µs and
/// measured from the first sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceGrid {
    /// Sample interval (µs).
    pub dt: f64,
    pub n_samples: usize,
    /// End of the drive pulse (µs).
    pub t0: f64,
}

impl TraceGrid {
    pub fn new(dt: f64, n_samples: usize, t0: f64) -> Result<Self> {
        let grid = Self { dt, n_samples, t0 };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Domain(format!("sample interval must be positive, got {}", self.dt)));
        }
        if self.n_samples == 0 {
            return Err(Error::Domain("grid needs at least one sample".into()));
        }
        if !self.t0.is_finite() {
            return Err(Error::Domain("pulse end time must be finite".into()));
        }
        Ok(())
    }

    /// Span covered by the samples (µs).
    pub fn span(&self) -> f64 {
        self.dt * self.n_samples as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_samples).map(|i| self.time(i))
    }

    /// Index range of samples with `lo <= t < hi`.
    pub fn index_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let first = ((lo / self.dt).ceil().max(0.0) as usize).min(self.n_samples);
        let end = ((hi / self.dt).ceil().max(0.0) as usize).min(self.n_samples);
        first..end.max(first)
    }

    pub fn same_as(&self, other: &TraceGrid) -> bool {
        self.n_samples == other.n_samples
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt
            && (self.t0 - other.t0).abs() <= 1e-9
    }

    fn check_same(&self, other: &TraceGrid, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{what}: {self:?} vs {other:?}")))
        }
    }
}

impl Default for TraceGrid {
    /// 10 ns sampling over the 56 µs protocol window, pulse ending at 6 µs.
    fn default() -> Self {
        Self { dt: 0.01, n_samples: 5600, t0: 6.0 }
    }
}

/// Time-domain inner product `dt * sum a_i b_i`.
pub fn inner(a: &[f64], b: &[f64], dt: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * dt
}

/// The three shape parameters of the mode function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemporalModeParams {
    /// Duration of the linear amplitude ramp (ns).
    pub rise_time: f64,
    /// Energy decay rate of the envelope, as kappa_f / 2pi (kHz).
    pub decay_rate: f64,
    /// Single-pole bandwidth of the amplifier response, as Lambda / 2pi (MHz).
    pub jpa_bandwidth: f64,
}

impl TemporalModeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rise_time >= 0.0) || !self.rise_time.is_finite() {
            return Err(Error::Domain(format!("rise time must be >= 0 ns, got {}", self.rise_time)));
        }
        if !(self.decay_rate > 0.0) || !self.decay_rate.is_finite() {
            return Err(Error::Domain(format!("decay rate must be > 0, got {}", self.decay_rate)));
        }
        if !(self.jpa_bandwidth > 0.0) {
            return Err(Error::Domain(format!("bandwidth must be > 0, got {}", self.jpa_bandwidth)));
        }
        Ok(())
    }

    /// Drive-pulse rise, cavity decay and the amplifier bandwidth implied by
    /// a fixed gain-bandwidth product at the given power gain.
    pub fn from_gain_bandwidth(rise_time: f64, decay_rate: f64, gbw_mhz: f64, gain_db: f64) -> Self {
        let amplitude_gain = 10f64.powf(gain_db / 20.0);
        Self { rise_time, decay_rate, jpa_bandwidth: gbw_mhz / amplitude_gain }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.rise_time, self.decay_rate, self.jpa_bandwidth]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self { rise_time: v[0], decay_rate: v[1], jpa_bandwidth: v[2] }
    }

    /// Envelope energy decay rate in rad/µs.
    pub fn kappa_f(&self) -> f64 {
        std::f64::consts::TAU * self.decay_rate * 1e-3
    }

    /// Amplifier pole in rad/µs.
    pub fn lambda(&self) -> f64 {
        std::f64::consts::TAU * self.jpa_bandwidth
    }
}

impl Default for TemporalModeParams {
    /// 150 ns drive pulse, 410 kHz cavity linewidth, 43 MHz gain-bandwidth
    /// product at 29 dB.
    fn default() -> Self {
        Self::from_gain_bandwidth(150.0, 410.0, 43.0, 29.0)
    }
}

/// Amplifier impulse response convolved into the mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImpulseResponse {
    /// `h(t) = Lambda exp(-Lambda t)`.
    #[default]
    SinglePole,
    /// No filtering; the bandwidth parameter is ignored.
    Ideal,
}

/// Construction options that are not optimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeShapeOptions {
    /// Mode support starts this long before the pulse end (µs).
    pub support_before: f64,
    /// Mode support ends this long after the pulse end (µs).
    pub support_after: f64,
    #[serde(default)]
    pub response: ImpulseResponse,
}

impl Default for ModeShapeOptions {
    fn default() -> Self {
        Self { support_before: 1.0, support_after: 8.0, response: ImpulseResponse::SinglePole }
    }
}

impl ModeShapeOptions {
    pub fn support_range(&self, grid: &TraceGrid) -> std::ops::Range<usize> {
        grid.index_range(grid.t0 - self.support_before, grid.t0 + self.support_after)
    }
}

/// Unit-norm mode function `f(t)` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMode {
    grid: TraceGrid,
    samples: Vec<f64>,
}

impl TemporalMode {
    /// Wraps arbitrary samples, normalizing them to unit L2 norm.
    pub fn from_samples(grid: TraceGrid, mut samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.n_samples {
            return Err(Error::GridMismatch(format!(
                "{} mode samples on a {}-sample grid",
                samples.len(),
                grid.n_samples
            )));
        }
        let norm = inner(&samples, &samples, grid.dt).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Domain("mode function has zero or non-finite norm".into()));
        }
        samples.iter_mut().for_each(|s| *s /= norm);
        Ok(Self { grid, samples })
    }

    pub fn grid(&self) -> &TraceGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
}

/// Builds the mode with default support and a single-pole response.
pub fn mode_shape(params: &TemporalModeParams, grid: &TraceGrid) -> Result<TemporalMode> {
    mode_shape_with(params, grid, &ModeShapeOptions::default())
}

/// Linear ramp of length `rise_time` ending at `t0`, then the amplitude
/// decay `exp(-kappa_f (t - t0) / 2)`, low-pass filtered by the amplifier
/// response, truncated to the support window and normalized.
pub fn mode_shape_with(
    params: &TemporalModeParams,
    grid: &TraceGrid,
    options: &ModeShapeOptions,
) -> Result<TemporalMode> {
    params.validate()?;
    grid.validate()?;
    let kappa_f = params.kappa_f();
    // at least five samples per amplitude e-folding time
    if 2.0 / kappa_f < 5.0 * grid.dt {
        return Err(Error::Resolution(format!(
            "dt = {} µs does not resolve the {:.4} µs decay envelope",
            grid.dt,
            2.0 / kappa_f
        )));
    }
    let lo = grid.t0 - options.support_before;
    let hi = grid.t0 + options.support_after;
    if lo < 0.0 || hi > grid.span() + 1e-9 {
        return Err(Error::Resolution(format!(
            "mode support [{lo}, {hi}] µs exceeds the grid span [0, {}] µs",
            grid.span()
        )));
    }
    let rise = params.rise_time * 1e-3;
    if rise > options.support_before {
        return Err(Error::Domain(format!(
            "rise time {} ns starts before the mode support",
            params.rise_time
        )));
    }
    let support = options.support_range(grid);

    let envelope = |t: f64| -> f64 {
        let s = t - grid.t0;
        if s >= 0.0 {
            (-0.5 * kappa_f * s).exp()
        } else if rise > 0.0 && s > -rise {
            (s + rise) / rise
        } else {
            0.0
        }
    };

    let mut samples = vec![0.0; grid.n_samples];
    match options.response {
        ImpulseResponse::Ideal => {
            for i in support.clone() {
                samples[i] = envelope(grid.time(i));
            }
        }
        ImpulseResponse::SinglePole => {
            // exact response of h(t) = L exp(-L t) to a sample-and-hold input
            let a = (-params.lambda() * grid.dt).exp();
            let mut y = 0.0;
            for i in support.clone() {
                y = a * y + (1.0 - a) * envelope(grid.time(i));
                samples[i] = y;
            }
        }
    }
    TemporalMode::from_samples(*grid, samples)
}

/// Piecewise-constant background window, zero during qubit readouts.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFunction {
    grid: TraceGrid,
    samples: Vec<f64>,
    readout_intervals: Vec<(f64, f64)>,
}

impl WindowFunction {
    pub fn grid(&self) -> &TraceGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn readout_intervals(&self) -> &[(f64, f64)] {
        &self.readout_intervals
    }
}

/// Unit-norm window equal to a constant outside the readout intervals
/// (start inclusive, stop exclusive, µs) and zero inside them.
pub fn background_window(grid: &TraceGrid, readout_intervals: &[(f64, f64)]) -> Result<WindowFunction> {
    grid.validate()?;
    for &(start, stop) in readout_intervals {
        if !(start < stop) || start < 0.0 || stop > grid.span() + 1e-9 {
            return Err(Error::Domain(format!(
                "readout interval [{start}, {stop}) lies outside the grid span [0, {}]",
                grid.span()
            )));
        }
    }
    let mut samples = vec![1.0; grid.n_samples];
    for &(start, stop) in readout_intervals {
        for i in grid.index_range(start, stop) {
            samples[i] = 0.0;
        }
    }
    let active = samples.iter().filter(|s| **s > 0.0).count();
    if active == 0 {
        return Err(Error::EmptyWindow);
    }
    let level = 1.0 / (active as f64 * grid.dt).sqrt();
    samples.iter_mut().for_each(|s| *s *= level);
    Ok(WindowFunction { grid: *grid, samples, readout_intervals: readout_intervals.to_vec() })
}

/// One digitized measurement record.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageTrace {
    pub grid: TraceGrid,
    pub samples: Vec<f64>,
}

impl VoltageTrace {
    pub fn new(grid: TraceGrid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.n_samples {
            return Err(Error::GridMismatch(format!(
                "trace has {} samples, grid has {}",
                samples.len(),
                grid.n_samples
            )));
        }
        Ok(Self { grid, samples })
    }
}

/// Precomputed linear functional mapping a trace to its quadrature value.
///
/// Folding the two-regressor solution into a single filter
/// `g = (f - <f,b> b) / (1 - <f,b>^2)` makes each extraction one dot product.
#[derive(Debug, Clone)]
pub struct QuadratureExtractor {
    grid: TraceGrid,
    filter: Vec<f64>,
    overlap: f64,
}

impl QuadratureExtractor {
    pub fn new(mode: &TemporalMode, window: &WindowFunction) -> Result<Self> {
        mode.grid.check_same(&window.grid, "mode and window grids differ")?;
        let dt = mode.grid.dt;
        let overlap = inner(&mode.samples, &window.samples, dt);
        let denom = 1.0 - overlap * overlap;
        if denom < 1e-12 {
            return Err(Error::Singular { overlap });
        }
        let filter = mode
            .samples
            .iter()
            .zip(&window.samples)
            .map(|(f, b)| (f - overlap * b) / denom)
            .collect();
        Ok(Self { grid: mode.grid, filter, overlap })
    }

    /// `<f, b>`.
    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    pub fn grid(&self) -> &TraceGrid {
        &self.grid
    }

    /// Extracts from raw samples; the caller guarantees the grid.
    pub fn extract_samples(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.filter.len() {
            return Err(Error::GridMismatch(format!(
                "trace has {} samples, mode has {}",
                samples.len(),
                self.filter.len()
            )));
        }
        Ok(inner(samples, &self.filter, self.grid.dt))
    }

    pub fn extract(&self, trace: &VoltageTrace) -> Result<f64> {
        self.grid.check_same(&trace.grid, "trace grid differs from mode grid")?;
        self.extract_samples(&trace.samples)
    }

    /// Variance of the extracted value for white trace noise of the given
    /// per-sample variance: `sigma^2 dt / (1 - <f,b>^2)`.
    pub fn white_noise_variance(&self, per_sample_variance: f64) -> f64 {
        per_sample_variance * self.grid.dt / (1.0 - self.overlap * self.overlap)
    }
}

/// Least-squares quadrature value of one trace (uncalibrated, V·√µs).
pub fn extract_quadrature(trace: &VoltageTrace, mode: &TemporalMode, window: &WindowFunction) -> Result<f64> {
    mode.grid.check_same(&trace.grid, "trace grid differs from mode grid")?;
    mode.grid.check_same(&window.grid, "window grid differs from mode grid")?;
    let dt = mode.grid.dt;
    let overlap = inner(&mode.samples, &window.samples, dt);
    let denom = 1.0 - overlap * overlap;
    if denom < 1e-12 {
        return Err(Error::Singular { overlap });
    }
    let vf = inner(&trace.samples, &mode.samples, dt);
    let vb = inner(&trace.samples, &window.samples, dt);
    Ok((vf - vb * overlap) / denom)
}

/// The first-order estimate `<V,f> - <V,b><b,f>`, which drops the
/// `1 - <f,b>^2` normalization and is accurate only for small overlaps.
pub fn extract_quadrature_first_order(
    trace: &VoltageTrace,
    mode: &TemporalMode,
    window: &WindowFunction,
) -> Result<f64> {
    mode.grid.check_same(&trace.grid, "trace grid differs from mode grid")?;
    mode.grid.check_same(&window.grid, "window grid differs from mode grid")?;
    let dt = mode.grid.dt;
    Ok(inner(&trace.samples, &mode.samples, dt)
        - inner(&trace.samples, &window.samples, dt) * inner(&window.samples, &mode.samples, dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_grid() -> TraceGrid {
        TraceGrid::new(0.01, 1600, 3.0).unwrap()
    }

    #[test]
    fn mode_is_normalized_for_any_params() {
        let grid = TraceGrid::default();
        for p in [
            TemporalModeParams::default(),
            TemporalModeParams { rise_time: 0.0, decay_rate: 300.0, jpa_bandwidth: 0.5 },
            TemporalModeParams { rise_time: 500.0, decay_rate: 900.0, jpa_bandwidth: 20.0 },
        ] {
            let m = mode_shape(&p, &grid).unwrap();
            let n = inner(m.samples(), m.samples(), grid.dt);
            assert!((n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn infinite_bandwidth_zero_rise_is_a_decaying_exponential() {
        let grid = small_grid();
        let p = TemporalModeParams { rise_time: 0.0, decay_rate: 410.0, jpa_bandwidth: 1e9 };
        let m = mode_shape(&p, &grid).unwrap();
        let k = p.kappa_f();
        let i0 = grid.index_range(grid.t0, grid.t0 + 1.0).start;
        assert_eq!(m.samples()[i0 - 1], 0.0);
        for i in [i0, i0 + 10, i0 + 200] {
            let expect = m.samples()[i0] * (-0.5 * k * (grid.time(i) - grid.time(i0))).exp();
            assert!((m.samples()[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn default_mode_peaks_near_pulse_end() {
        let grid = TraceGrid::default();
        let m = mode_shape(&TemporalModeParams::default(), &grid).unwrap();
        let (imax, _) = m
            .samples()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!((grid.time(imax) - grid.t0).abs() < 0.2, "peak at {}", grid.time(imax));
    }

    #[test]
    fn mode_errors() {
        let grid = TraceGrid::new(0.5, 200, 6.0).unwrap();
        assert!(matches!(
            mode_shape(&TemporalModeParams::default(), &grid),
            Err(Error::Resolution(_))
        ));
        let short = TraceGrid::new(0.01, 800, 6.0).unwrap();
        assert!(matches!(
            mode_shape(&TemporalModeParams::default(), &short),
            Err(Error::Resolution(_))
        ));
        let bad = TemporalModeParams { decay_rate: -1.0, ..Default::default() };
        assert!(mode_shape(&bad, &TraceGrid::default()).is_err());
    }

    #[test]
    fn window_examples() {
        let grid = small_grid();
        let w = background_window(&grid, &[]).unwrap();
        let level = 1.0 / grid.span().sqrt();
        assert!(w.samples().iter().all(|s| (s - level).abs() < 1e-12));

        let grid = TraceGrid::default();
        let reads = [(1.0, 3.0), (30.0, 32.0)];
        let w = background_window(&grid, &reads).unwrap();
        assert!((inner(w.samples(), w.samples(), grid.dt) - 1.0).abs() < 1e-12);
        for &(a, b) in &reads {
            assert!(grid.index_range(a, b).all(|i| w.samples()[i] == 0.0));
        }
        assert_eq!(w.samples().iter().filter(|s| **s == 0.0).count(), 400);

        assert!(matches!(background_window(&grid, &[(0.0, 56.0)]), Err(Error::EmptyWindow)));
        assert!(background_window(&grid, &[(50.0, 60.0)]).is_err());
        assert!(background_window(&grid, &[(5.0, 4.0)]).is_err());
    }

    fn orthogonal_setup() -> (TraceGrid, TemporalMode, WindowFunction) {
        // an antisymmetric mode is orthogonal to a constant window
        let grid = TraceGrid::new(0.01, 400, 2.0).unwrap();
        let s: Vec<f64> = grid.times().map(|t| (std::f64::consts::TAU * t / 4.0).sin()).collect();
        let mode = TemporalMode::from_samples(grid, s).unwrap();
        let window = background_window(&grid, &[]).unwrap();
        (grid, mode, window)
    }

    #[test]
    fn projection_examples() {
        let (grid, mode, window) = orthogonal_setup();
        let overlap = inner(mode.samples(), window.samples(), grid.dt);
        assert!(overlap.abs() < 1e-12);
        let trace = VoltageTrace::new(grid, mode.samples().iter().map(|f| 2.5 * f).collect()).unwrap();
        assert!((extract_quadrature(&trace, &mode, &window).unwrap() - 2.5).abs() < 1e-12);

        let grid = TraceGrid::default();
        let mode = mode_shape(&TemporalModeParams::default(), &grid).unwrap();
        let window = background_window(&grid, &[(1.0, 3.0), (30.0, 32.0)]).unwrap();
        for c in [-3.0, 0.5, 100.0] {
            let trace = VoltageTrace::new(grid, window.samples().iter().map(|b| c * b).collect()).unwrap();
            assert!(extract_quadrature(&trace, &mode, &window).unwrap().abs() < 1e-10 * c.abs());
        }
    }

    #[test]
    fn matches_normal_equation_oracle() {
        let grid = TraceGrid::default();
        let mode = mode_shape(&TemporalModeParams::default(), &grid).unwrap();
        let window = background_window(&grid, &[(1.0, 3.0), (30.0, 32.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let v: Vec<f64> = (0..grid.n_samples).map(|_| rng.random_range(-1.0..1.0)).collect();
            // brute-force 2x2 normal equations without unit-norm shortcuts
            let (f, b) = (mode.samples(), window.samples());
            let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, c)| a * c).sum::<f64>();
            let (ff, fb, bb) = (dot(f, f), dot(f, b), dot(b, b));
            let (vf, vb) = (dot(&v, f), dot(&v, b));
            let det = ff * bb - fb * fb;
            let vq = (vf * bb - vb * fb) / det;
            let trace = VoltageTrace::new(grid, v).unwrap();
            let got = extract_quadrature(&trace, &mode, &window).unwrap();
            assert!((got - vq).abs() < 1e-10, "{got} vs {vq}");
            let ex = QuadratureExtractor::new(&mode, &window).unwrap();
            assert!((ex.extract(&trace).unwrap() - vq).abs() < 1e-10);
        }
    }

    #[test]
    fn first_order_formula_agrees_for_small_overlap() {
        // a window blanking most of the mode keeps <f,b> small but nonzero
        let grid = TraceGrid::default();
        let mode = mode_shape(&TemporalModeParams::default(), &grid).unwrap();
        let window = background_window(&grid, &[(6.1, 16.0)]).unwrap();
        let overlap = inner(mode.samples(), window.samples(), grid.dt);
        assert!(overlap > 1e-4 && overlap < 0.03, "overlap {overlap}");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = mode
            .samples()
            .iter()
            .zip(window.samples())
            .map(|(f, b)| 0.7 * f + 0.2 * b + rng.random_range(-0.05..0.05))
            .collect();
        let trace = VoltageTrace::new(grid, v).unwrap();
        let exact = extract_quadrature(&trace, &mode, &window).unwrap();
        let approx = extract_quadrature_first_order(&trace, &mode, &window).unwrap();
        assert!(((exact - approx) / exact).abs() < 1e-3);
    }

    #[test]
    fn degenerate_regressors_are_rejected() {
        let grid = small_grid();
        let window = background_window(&grid, &[]).unwrap();
        let mode = TemporalMode::from_samples(grid, window.samples().to_vec()).unwrap();
        let trace = VoltageTrace::new(grid, vec![1.0; grid.n_samples]).unwrap();
        assert!(matches!(extract_quadrature(&trace, &mode, &window), Err(Error::Singular { .. })));
        assert!(QuadratureExtractor::new(&mode, &window).is_err());
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let grid = TraceGrid::default();
        let mode = mode_shape(&TemporalModeParams::default(), &grid).unwrap();
        let window = background_window(&grid, &[]).unwrap();
        let other = TraceGrid::new(0.02, 2800, 6.0).unwrap();
        let trace = VoltageTrace::new(other, vec![0.0; 2800]).unwrap();
        assert!(matches!(extract_quadrature(&trace, &mode, &window), Err(Error::GridMismatch(_))));
    }
}
