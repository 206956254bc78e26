//! TOML config file plus flag overrides. Flags win over the file, the file
//! wins over defaults; the merged result is logged once per run so any
//! output can be reproduced from its log line.

use anyhow::{Context, Result};
use memctl_core::curation::CurationConfig;
use memctl_core::predictor::{HeuristicConfig, RemoteConfig};
use memctl_core::CoreConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub core: CoreConfig,
    pub curation: CurationSection,
    pub predictor: PredictorSection,
    pub service: ServiceSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationSection {
    pub target_size: usize,
    pub max_distractors: usize,
    pub identity_jaccard: f64,
    pub strict_parse: bool,
    pub mapping: memctl_core::curation::OpMapping,
}

impl Default for CurationSection {
    fn default() -> Self {
        let base = CurationConfig::default();
        CurationSection {
            target_size: base.target_size,
            max_distractors: base.max_distractors,
            identity_jaccard: base.identity_jaccard,
            strict_parse: base.strict_parse,
            mapping: base.mapping,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorSection {
    pub theta_c: f64,
    pub remote: Option<RemoteConfig>,
}

impl Default for PredictorSection {
    fn default() -> Self {
        PredictorSection { theta_c: HeuristicConfig::default().theta_c, remote: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceSection {
    pub bind: String,
    pub persist_dir: Option<PathBuf>,
}

impl Default for ServiceSection {
    fn default() -> Self {
        ServiceSection { bind: "127.0.0.1:8080".to_owned(), persist_dir: None }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("cannot parse config {}", path.display()))
    }

    pub fn resolve_seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(0)
    }

    pub fn curation_config(&self, seed: u64) -> CurationConfig {
        CurationConfig {
            seed,
            target_size: self.curation.target_size,
            max_distractors: self.curation.max_distractors,
            identity_jaccard: self.curation.identity_jaccard,
            mapping: self.curation.mapping,
            strict_parse: self.curation.strict_parse,
            ..CurationConfig::default()
        }
    }

    pub fn heuristic_config(&self) -> HeuristicConfig {
        HeuristicConfig { theta_c: self.predictor.theta_c, ..HeuristicConfig::default() }
    }

    pub fn core_config(&self) -> CoreConfig {
        self.core
    }
}
