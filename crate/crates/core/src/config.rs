//! The TOML configuration file shared by all subcommands.
//!
//! One document, one section per concern:
//!
//! ```toml
//! [margins]          # seed, plus [margins.vaccine], [margins.control], [margins.allocation]
//! [calibration]      # seeds, concentrations, [calibration.targets] (per 1000)
//! [causal]           # generative model parameters
//! [randomization]    # kind = "complete" | "stratified", ...
//! [mc]               # replicates, seed, empty_policy
//! ```
//!
//! Every section is optional; a command that needs a missing one fails with
//! [`ConfigError::MissingSection`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::causal::GenerativeConfig;
use crate::estimators::EmptyPolicy;
use crate::margins::{MarginSpec, PanelTargets};
use crate::randomization::RandomizationScheme;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config has no [{0}] section")]
    MissingSection(&'static str),
    #[error("invalid [{section}] section: {reason}")]
    Invalid { section: &'static str, reason: String },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub margins: Option<MarginsSection>,
    pub calibration: Option<CalibrationSection>,
    pub causal: Option<GenerativeConfig>,
    pub randomization: Option<RandomizationScheme>,
    pub mc: Option<McSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginsSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(flatten)]
    pub spec: MarginSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    /// Published estimates in cases per 1000.
    pub targets: PanelTargets,
    /// Candidate seeds are `0..seeds`.
    #[serde(default = "default_calibration_seeds")]
    pub seeds: u64,
    /// Dirichlet concentrations to try. Plain multinomial allocation is
    /// always a candidate too.
    #[serde(default = "default_concentrations")]
    pub concentrations: Vec<f64>,
}

fn default_calibration_seeds() -> u64 {
    256
}

fn default_concentrations() -> Vec<f64> {
    vec![2000.0, 1000.0, 500.0, 200.0]
}

impl CalibrationSection {
    pub fn candidate_concentrations(&self) -> Vec<Option<f64>> {
        std::iter::once(None).chain(self.concentrations.iter().copied().map(Some)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub empty_policy: EmptyPolicy,
}

fn default_replicates() -> usize {
    1000
}

impl Default for McSection {
    fn default() -> Self {
        McSection { replicates: default_replicates(), seed: 0, empty_policy: EmptyPolicy::Error }
    }
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ConfigFile = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn is_empty(&self) -> bool {
        *self == ConfigFile::default()
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if let Some(c) = &self.causal {
            c.validate().map_err(|e| ConfigError::Invalid { section: "causal", reason: e.to_string() })?;
        }
        if let Some(c) = &self.calibration {
            if c.seeds == 0 {
                return Err(ConfigError::Invalid {
                    section: "calibration",
                    reason: "seeds must be at least 1".into(),
                });
            }
            if c.concentrations.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
                return Err(ConfigError::Invalid {
                    section: "calibration",
                    reason: "concentrations must be positive".into(),
                });
            }
        }
        if let Some(m) = &self.mc {
            if m.replicates < 2 {
                return Err(ConfigError::Invalid {
                    section: "mc",
                    reason: "replicates must be at least 2".into(),
                });
            }
        }
        Ok(())
    }

    pub fn margins(&self) -> Result<&MarginsSection, ConfigError> {
        self.margins.as_ref().ok_or(ConfigError::MissingSection("margins"))
    }

    pub fn causal(&self) -> Result<&GenerativeConfig, ConfigError> {
        self.causal.as_ref().ok_or(ConfigError::MissingSection("causal"))
    }

    pub fn calibration(&self) -> Result<&CalibrationSection, ConfigError> {
        self.calibration.as_ref().ok_or(ConfigError::MissingSection("calibration"))
    }
}
