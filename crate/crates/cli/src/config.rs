//! Run configuration file. Every field is optional; command-line flags
//! override the file.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sigverify::dataset::ProtocolCounts;
use sigverify::dtw::DtwConfig;
use sigverify::features::FeatureConfig;
use sigverify::sffs::DEFAULT_K_MAX;
use sigverify::siamese::SiameseConfig;
use sigverify::train::TrainConfig;

pub const DEFAULT_SEED: u64 = 20170101;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds model initialization and pair shuffling.
    pub seed: u64,
    /// Development users; unset means three quarters of the corpus.
    pub dev_users: Option<usize>,
    pub counts: ProtocolCounts,
    pub features: FeatureConfig,
    pub model: SiameseConfig,
    pub train: TrainConfig,
    pub dtw: DtwConfig,
    pub sffs_k_max: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            dev_users: None,
            counts: ProtocolCounts::default(),
            features: FeatureConfig::default(),
            model: SiameseConfig::default(),
            train: TrainConfig::default(),
            dtw: DtwConfig::default(),
            sffs_k_max: DEFAULT_K_MAX,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
