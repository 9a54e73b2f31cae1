//! Run configuration: a TOML file overridable by command-line flags, with
//! the ablation toggles, backend wiring, dataset selection and output
//! location. The resolved configuration is snapshotted into the run
//! artifact so any run can be reproduced from its output directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendConfig;
use crate::dataset::Split;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Ablation switches. All pipeline stages default to on; gold-attribution
/// injection defaults to off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Toggles {
    pub adp: bool,
    pub cap: bool,
    pub ic: bool,
    pub ars: bool,
    pub pps: bool,
    pub gold_attribution: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles { adp: true, cap: true, ic: true, ars: true, pps: true, gold_attribution: false }
    }
}

impl Toggles {
    /// Apply one `name=on|off` override.
    pub fn set(&mut self, name: &str, on: bool) -> Result<(), ConfigError> {
        match name {
            "adp" => self.adp = on,
            "cap" => self.cap = on,
            "ic" => self.ic = on,
            "ars" => self.ars = on,
            "pps" => self.pps = on,
            "gold_attribution" => self.gold_attribution = on,
            other => {
                return Err(ConfigError::Invalid(format!("unknown toggle {other:?}")));
            }
        }
        Ok(())
    }

    pub fn parse_assignment(s: &str) -> Result<(String, bool), ConfigError> {
        let (name, value) = s
            .split_once('=')
            .ok_or_else(|| ConfigError::Invalid(format!("toggle {s:?} is not name=on|off")))?;
        let on = match value {
            "on" | "true" | "1" => true,
            "off" | "false" | "0" => false,
            other => {
                return Err(ConfigError::Invalid(format!("toggle value {other:?} is not on|off")))
            }
        };
        Ok((name.to_string(), on))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub per_class: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub backend: BackendConfig,
    /// Pipeline model identifier sent on every request.
    pub model: String,
    /// Model used for the prompt rewrites; defaults to the pipeline model.
    #[serde(default)]
    pub adp_model: Option<String>,
    #[serde(default)]
    pub toggles: Toggles,
    pub dataset_root: PathBuf,
    #[serde(default = "default_split")]
    pub split: Split,
    #[serde(default)]
    pub sample: Option<SampleSpec>,
    pub out_dir: PathBuf,
    /// Directory of raw prompt `.txt` files; compiled-in assets when unset.
    #[serde(default)]
    pub prompts_dir: Option<PathBuf>,
    /// Where rewrites are persisted; defaults to `prompts.lock.json` inside
    /// `prompts_dir`, and to no persistence when using compiled-in assets.
    #[serde(default)]
    pub prompts_lock: Option<PathBuf>,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub skip_failures: bool,
}

fn default_split() -> Split {
    Split::Validation
}

fn default_concurrency() -> usize {
    4
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig = toml::from_str(&text)?;
        Ok(config)
    }

    pub fn adp_model(&self) -> &str {
        self.adp_model.as_deref().unwrap_or(&self.model)
    }

    pub fn effective_lock_path(&self) -> Option<PathBuf> {
        match (&self.prompts_lock, &self.prompts_dir) {
            (Some(lock), _) => Some(lock.clone()),
            (None, Some(dir)) => Some(dir.join("prompts.lock.json")),
            (None, None) => None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.backend
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.model.trim().is_empty() {
            return Err(ConfigError::Invalid("model must be set".into()));
        }
        if self.concurrency == 0 {
            return Err(ConfigError::Invalid("concurrency must be positive".into()));
        }
        if let Some(sample) = &self.sample {
            if sample.per_class == 0 {
                return Err(ConfigError::Invalid("sample.per_class must be positive".into()));
            }
        }
        Ok(())
    }
}
