use std::path::Path;

use serde::{Deserialize, Serialize};
use smartchair_core::dataset::{CohortSpec, SplitSpec};
use smartchair_core::embed::TsneParams;
use smartchair_core::monitor::ServiceConfig;
use smartchair_core::ppg::{HrProfile, ValidationConfig};

use crate::error::CliError;

/// Everything a run can be configured with. Each command reads its own
/// section; `seed` applies to all of them unless `--seed` overrides it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub seed: Option<u64>,
    pub simulate: SimulateConfig,
    pub train: TrainConfig,
    pub embed: EmbedConfig,
    pub ppg: ValidationConfig,
    pub replay: ReplayConfig,
    pub serve: ServiceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub cohort: CohortSpec,
    /// Heart-rate profile of the PPG trace attached to the replay stream.
    pub hr_profile: HrProfile,
    pub ppg_snr_db: f64,
    pub ppg_fs_hz: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { cohort: CohortSpec::default(), hr_profile: HrProfile::default(), ppg_snr_db: 20.0, ppg_fs_hz: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub models: Vec<String>,
    pub split: SplitSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { models: ["dt", "rf", "svm", "mlp"].map(String::from).to_vec(), split: SplitSpec::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    pub method: String,
    pub dims: usize,
    /// Rows are subsampled to at most this many; exact t-SNE is quadratic.
    pub max_points: usize,
    pub tsne: TsneParams,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self { method: "tsne".into(), dims: 2, max_points: 1500, tsne: TsneParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayConfig {
    pub addr: String,
    /// Playback speed relative to the frame timestamps; 0 sends back to back.
    pub speed: f64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self { addr: "127.0.0.1:7878".into(), speed: 1.0 }
    }
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
