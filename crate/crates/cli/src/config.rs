//! Run configuration: one TOML file holding every knob of the pipeline.
//! Every table is optional; omitted keys take the defaults below, unknown
//! keys are rejected.

use std::path::{Path, PathBuf};

use iphoton_core::simulator::{ChainConfig, ProtocolConfig};
use iphoton_core::temporal_mode::{ModeShapeOptions, TemporalModeParams};
use iphoton_core::tomography::FitOptions;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceFormat {
    #[default]
    Binary,
    Csv,
}

impl TraceFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Binary => "iptrc",
            Self::Csv => "csv",
        }
    }
}

/// Extraction mode. Without explicit parameters the mode emitted by the
/// configured protocol and chain is used.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeConfig {
    pub params: Option<TemporalModeParams>,
    pub shape: ModeShapeOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographyConfig {
    pub n_max: usize,
    pub n_sets: usize,
    pub trials_per_set: usize,
    /// Backaction occupation for the amplified calibration; omitted means
    /// the value implied by the chain configuration.
    pub nbar_backaction: Option<f64>,
    pub fit: FitOptions,
    pub trace_format: TraceFormat,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self {
            n_max: 3,
            n_sets: 8,
            trials_per_set: 7000,
            nbar_backaction: None,
            fit: FitOptions::default(),
            trace_format: TraceFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CharacterizationConfig {
    pub dephasing_gains_db: Vec<f64>,
    /// Intrinsic dephasing Gamma0 / 2pi used for synthetic data (kHz).
    pub gamma0: f64,
    pub dephasing_scatter: f64,
    pub sweep_gains_db: Vec<f64>,
    pub sweep_temperatures_mk: Vec<f64>,
    pub sweep_scatter: f64,
    /// Gains at which the efficiency and backaction curves are tabulated.
    pub curve_gains_db: Vec<f64>,
}

impl Default for CharacterizationConfig {
    fn default() -> Self {
        Self {
            dephasing_gains_db: (0..9).map(|k| 17.0 + 2.0 * k as f64).collect(),
            gamma0: 40.0,
            dephasing_scatter: 0.05,
            sweep_gains_db: vec![20.0, 25.0, 30.0],
            sweep_temperatures_mk: (0..20).map(|k| 79.0 + (900.0 - 79.0) * k as f64 / 19.0).collect(),
            sweep_scatter: 0.02,
            curve_gains_db: (0..=16).map(|k| 17.0 + k as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub protocol: ProtocolConfig,
    pub chain: ChainConfig,
    pub mode: ModeConfig,
    pub tomography: TomographyConfig,
    pub characterization: CharacterizationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            output_dir: PathBuf::from("iphoton-out"),
            protocol: ProtocolConfig::default(),
            chain: ChainConfig::default(),
            mode: ModeConfig::default(),
            tomography: TomographyConfig::default(),
            characterization: CharacterizationConfig::default(),
        }
    }
}

fn field<T>(path: &str, r: iphoton_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Config(format!("{path}: {e}")))
}

fn check(path: &str, ok: bool, what: &str) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("{path}: {what}")))
    }
}

impl RunConfig {
    /// Reads a config file; `None` gives the defaults.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> CliResult<()> {
        field("protocol", self.protocol.validate())?;
        field("chain", self.chain.validate())?;
        if let Some(p) = &self.mode.params {
            field("mode.params", p.validate())?;
        }
        let t = &self.tomography;
        check("tomography.n_max", (1..=iphoton_core::fock::MAX_PHOTON_NUMBER).contains(&t.n_max), "must lie in 1..=20")?;
        check("tomography.n_sets", t.n_sets >= 2, "need at least two paired sets")?;
        check("tomography.trials_per_set", t.trials_per_set >= 1, "must be >= 1")?;
        if let Some(n) = t.nbar_backaction {
            check("tomography.nbar_backaction", n >= 0.0 && n.is_finite(), "must be >= 0")?;
        }
        check("tomography.fit.tolerance", t.fit.tolerance > 0.0, "must be > 0")?;
        let c = &self.characterization;
        let gains_ok = |g: &[f64]| !g.is_empty() && g.iter().all(|g| (0.0..=40.0).contains(g));
        check("characterization.dephasing_gains_db", gains_ok(&c.dephasing_gains_db), "need gains in [0, 40] dB")?;
        check("characterization.sweep_gains_db", gains_ok(&c.sweep_gains_db), "need gains in [0, 40] dB")?;
        check("characterization.curve_gains_db", gains_ok(&c.curve_gains_db), "need gains in [0, 40] dB")?;
        check(
            "characterization.sweep_temperatures_mk",
            c.sweep_temperatures_mk.len() >= 3 && c.sweep_temperatures_mk.iter().all(|t| *t > 0.0),
            "need at least three positive temperatures",
        )?;
        check("characterization.gamma0", c.gamma0 >= 0.0, "must be >= 0")?;
        check(
            "characterization scatter",
            c.dephasing_scatter >= 0.0 && c.sweep_scatter >= 0.0,
            "relative scatter must be >= 0",
        )?;
        Ok(())
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
    }

    /// SHA-256 of the resolved config text.
    pub fn hash(&self) -> CliResult<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    pub fn mode_params(&self) -> TemporalModeParams {
        self.mode.params.unwrap_or_else(|| self.chain.emitted_mode(&self.protocol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let text = c.to_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c: RunConfig = toml::from_str("seed = 3\n[chain]\ng_jpa_db = 25.0\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.chain.g_jpa_db, 25.0);
        assert_eq!(c.chain.n_hemt, 18.0);
        assert_eq!(c.protocol, ProtocolConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = toml::from_str::<RunConfig>("[chain]\ngain = 25.0\n").unwrap_err();
        assert!(e.to_string().contains("gain"), "{e}");
    }

    #[test]
    fn validation_names_the_field() {
        let mut c = RunConfig::default();
        c.tomography.n_sets = 1;
        match c.validate() {
            Err(CliError::Config(m)) => assert!(m.starts_with("tomography.n_sets"), "{m}"),
            other => panic!("{other:?}"),
        }
    }
}
