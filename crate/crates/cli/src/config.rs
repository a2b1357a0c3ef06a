use std::path::Path;

use serde::{Deserialize, Serialize};

use qsm_core::phase::VSharpConfig;
use qsm_core::recon::{CosmosConfig, MediConfig, TkdConfig};
use qsm_core::training::{LossWeights, PatchConfig};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Acquisition {
    pub te_s: f64,
    pub b0_t: f64,
}

impl Default for Acquisition {
    fn default() -> Self {
        Self { te_s: 0.025, b0_t: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    /// 1, 3 or 5 standard tilts.
    pub orientations: usize,
    pub tilt_deg: f64,
    pub noise_sigma_ppm: f64,
    pub seed: u64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { orientations: 5, tilt_deg: 20.0, noise_sigma_ppm: 0.0, seed: 0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub seed: u64,
}

/// Every tunable of every command. Missing sections and keys take their
/// defaults; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub acquisition: Acquisition,
    pub simulate: SimulateSection,
    pub vsharp: VSharpConfig,
    pub tkd: TkdConfig,
    pub medi: MediConfig,
    pub cosmos: CosmosConfig,
    pub patches: PatchConfig,
    pub loss: LossWeights,
    pub augment: AugmentSection,
}

impl RunConfig {
    /// Reads `.toml` or `.json` by extension.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let bad = |reason: String| CliError::Config { path: path.to_owned(), reason };
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| bad(e.to_string())),
            Some("json") => serde_json::from_str(&text).map_err(|e| bad(e.to_string())),
            _ => Err(bad("expected a .toml or .json extension".into())),
        }
    }
}
