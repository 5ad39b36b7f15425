use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const RESOLVED_CONFIG: &str = "config.resolved.toml";

/// Provenance of one command invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    /// Output files, relative to the output directory.
    pub files: Vec<String>,
    /// Wall-clock seconds per stage.
    pub timings: Vec<(String, f64)>,
    pub notes: Vec<String>,
    pub details: serde_json::Value,
}

/// Output directory plus the manifest being assembled for it.
pub struct Run {
    pub config: RunConfig,
    pub dir: PathBuf,
    manifest: RunManifest,
    clock: Instant,
}

impl Run {
    pub fn start(command: &str, config: RunConfig) -> CliResult<Self> {
        config.validate()?;
        let dir = config.output_dir.clone();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let manifest = RunManifest {
            command: command.to_string(),
            config_hash: config.hash()?,
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            files: Vec::new(),
            timings: Vec::new(),
            notes: standing_notes(&config),
            details: serde_json::Value::Null,
        };
        let mut run = Self { config, dir, manifest, clock: Instant::now() };
        let text = run.config.to_toml()?;
        run.write_text(RESOLVED_CONFIG, &text)?;
        Ok(run)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn record_file(&mut self, name: &str) {
        if !self.manifest.files.iter().any(|f| f == name) {
            self.manifest.files.push(name.to_string());
        }
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> CliResult<()> {
        let path = self.path(name);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.record_file(name);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
        self.write_text(name, &(text + "\n"))
    }

    pub fn write_table(&mut self, name: &str, table: &iphoton_core::io::Table) -> CliResult<()> {
        table.write_file(&self.path(name))?;
        self.record_file(name);
        Ok(())
    }

    /// Closes the current stage and logs its duration.
    pub fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        let dt = now.duration_since(self.clock).as_secs_f64();
        self.clock = now;
        self.manifest.timings.push((stage.to_string(), dt));
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.manifest.notes.push(note.into());
    }

    pub fn set_details(&mut self, details: serde_json::Value) {
        self.manifest.details = details;
    }

    pub fn finish(mut self) -> CliResult<RunManifest> {
        let name = format!("manifest.{}.json", self.manifest.command);
        self.record_file(&name);
        let manifest = self.manifest.clone();
        self.write_json(&name, &manifest)?;
        Ok(manifest)
    }
}

/// Caveats that apply to every run of a configuration.
pub fn standing_notes(config: &RunConfig) -> Vec<String> {
    let p = &config.protocol;
    vec![
        format!(
            "post-pulse rejection split: qubit decay {:.4} from T1 = {} us, pulse failure {:.4}; the split is a modeling choice",
            p.decay_probability(),
            p.t1_qubit,
            p.p_pulse_fail
        ),
        format!(
            "output coupling kappa_out/2pi = {} kHz of kappa/2pi = {} kHz; 300 and 310 kHz are both quoted for this device",
            p.kappa_out, p.kappa
        ),
        format!(
            "qubit frequency {} GHz is metadata only; quoted values for this device disagree (3.495 and 4.385 GHz)",
            p.qubit_freq
        ),
    ]
}

/// Fails with the missing-stage error unless every path exists.
pub fn require(paths: &[(&str, &Path)]) -> CliResult<()> {
    let missing: Vec<String> = paths
        .iter()
        .filter(|(_, p)| !p.exists())
        .map(|(what, p)| format!("{what}: {}", p.display()))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CliError::MissingStage(missing))
    }
}
