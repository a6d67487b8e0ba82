use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::extract::ExtractConfig;
use super::folds::FoldConfig;
use super::model::ModelConfig;
use crate::conventional::ConventionalConfig;
use crate::error::{Error, Result};
use crate::locator::LocatorConfig;
use crate::radiomics::RadiomicsConfig;

pub const DEFAULT_SEED: u64 = 20220901;

/// Every tunable of the pipeline. All randomness derives from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub locator: LocatorConfig,
    pub conventional: ConventionalConfig,
    pub radiomics: RadiomicsConfig,
    pub extract: ExtractConfig,
    pub folds: FoldConfig,
    pub model: ModelConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            locator: LocatorConfig::default(),
            conventional: ConventionalConfig::default(),
            radiomics: RadiomicsConfig::default(),
            extract: ExtractConfig::default(),
            folds: FoldConfig::default(),
            model: ModelConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }

    pub fn meta(&self) -> super::ArtifactMeta {
        super::ArtifactMeta::new(self.hash(), self.seed)
    }
}
