//! Experiment configuration files.
//!
//! A config is a TOML document with one table per component. Every key is
//! optional; missing keys keep the reference-scenario defaults of
//! [`ExperimentConfig::default`]. Unknown keys are rejected.
//!
//! ```toml
//! [system]
//! n_h = 13
//!
//! [geometry_r]
//! distance_m = 40.0
//!
//! [experiment]
//! codebook_mode = "ideal"
//! n_train = 50000
//! ```

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{LinkGeometry, SystemConfig};
use crate::codebook::{CodebookMode, RisProfile};
use crate::error::{Error, Result};
use crate::mlp::TrainingConfig;

/// Amplitude-model parameters; the array shape comes from `[system]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RisSettings {
    pub beta_min: f64,
    pub alpha: f64,
    pub psi_zero: f64,
}

impl Default for RisSettings {
    fn default() -> Self {
        RisSettings {
            beta_min: 0.2,
            alpha: 1.6,
            psi_zero: 0.43 * PI,
        }
    }
}

impl RisSettings {
    pub fn profile(&self, system: &SystemConfig) -> RisProfile {
        RisProfile {
            beta_min: self.beta_min,
            alpha: self.alpha,
            psi_zero: self.psi_zero,
            n_h: system.n_h,
            n_v: system.n_v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSettings {
    /// Codebook used by `gen-dataset`, `train`, `eval` and `benchmark`.
    pub codebook_mode: CodebookMode,
    /// Codebooks compared by the two sweeps.
    pub sweep_modes: Vec<CodebookMode>,
    pub n_train: usize,
    pub n_test: usize,
    /// Horizontal RIS sizes of the element sweep and the benchmark (`N = n_h · n_v`).
    pub sweep_n_h: Vec<usize>,
    pub sweep_distances_m: Vec<f64>,
    pub sweep_realizations: usize,
    pub timing_batches: usize,
    pub timing_batch_size: usize,
    pub timing_warmup: usize,
    /// Samples used to calibrate the input scale of a new model.
    pub calibration_samples: usize,
    /// Train and cache a model when a sweep needs one that is not on disk.
    pub train_missing_models: bool,
    pub master_seed: u64,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            codebook_mode: CodebookMode::Practical,
            sweep_modes: CodebookMode::ALL.to_vec(),
            n_train: 200_000,
            n_test: 10_000,
            sweep_n_h: vec![9, 13, 17, 21],
            sweep_distances_m: vec![10.0, 20.0, 30.0, 40.0, 50.0],
            sweep_realizations: 500,
            timing_batches: 10,
            timing_batch_size: 100,
            timing_warmup: 100,
            calibration_samples: 1000,
            train_missing_models: true,
            master_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub geometry_t: LinkGeometry,
    pub geometry_r: LinkGeometry,
    pub ris: RisSettings,
    pub training: TrainingConfig,
    pub experiment: ExperimentSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            system: SystemConfig::default(),
            geometry_t: LinkGeometry::tx_default(),
            geometry_r: LinkGeometry::rx_default(),
            ris: RisSettings::default(),
            training: TrainingConfig::default(),
            experiment: ExperimentSettings::default(),
        }
    }
}

/// Recursively overlays `patch` onto `base`.
fn merge(base: &mut toml::Table, patch: toml::Table) {
    for (key, value) in patch {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(p)) => merge(b, p),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

impl ExperimentConfig {
    /// Parses a config document, filling absent keys from the defaults.
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        let patch: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
        for (section, value) in &patch {
            if !value.is_table() {
                return Err(format!("top-level key `{section}` must be a table"));
            }
        }
        let mut table = toml::Table::try_from(ExperimentConfig::default()).map_err(|e| e.to_string())?;
        merge(&mut table, patch);
        let cfg: ExperimentConfig = table.try_into().map_err(|e: toml::de::Error| e.to_string())?;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_toml_str(&text).map_err(|reason| Error::Config {
            path: path.to_path_buf(),
            reason: reason.trim_end().to_string(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.geometry_t.validate()?;
        self.geometry_r.validate()?;
        self.ris.profile(&self.system).validate()?;
        self.training.validate()?;
        let e = &self.experiment;
        if e.timing_batches == 0 || e.timing_batch_size == 0 {
            return Err(Error::invalid("timing_batches and timing_batch_size must be >= 1"));
        }
        if e.sweep_n_h.contains(&0) {
            return Err(Error::invalid("sweep_n_h entries must be >= 1"));
        }
        if e.sweep_distances_m.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::invalid("sweep distances must be positive"));
        }
        Ok(())
    }

    /// Copy with a different horizontal RIS size.
    pub fn with_n_h(&self, n_h: usize) -> Self {
        let mut cfg = self.clone();
        cfg.system.n_h = n_h;
        cfg
    }

    pub fn ris_profile(&self) -> RisProfile {
        self.ris.profile(&self.system)
    }

    /// First 8 bytes of the SHA-256 of the canonical serialization.
    pub fn hash(&self) -> u64 {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }
}
