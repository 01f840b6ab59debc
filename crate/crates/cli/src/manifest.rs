//! Per-seed run manifests.

use std::path::{Path, PathBuf};

use hgo_gp::ScenarioConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_path: PathBuf,
    pub output_directory: PathBuf,
    /// Every seed of the invocation that produced this file.
    pub seeds: Vec<u64>,
    /// Seed of the run this manifest describes.
    pub seed: u64,
    /// `sha256:<hex>` of the effective config in git object form.
    pub config_hash: String,
    pub tool_version: String,
    pub effective_config: ScenarioConfig,
}

impl RunManifest {
    pub fn new(
        config_path: &Path,
        output_directory: &Path,
        seeds: &[u64],
        effective_config: &ScenarioConfig,
    ) -> Result<Self, CliError> {
        if seeds.is_empty() {
            return Err(CliError::invalid("at least one seed is required"));
        }
        Ok(Self {
            config_path: config_path.to_path_buf(),
            output_directory: output_directory.to_path_buf(),
            seeds: seeds.to_vec(),
            seed: effective_config.scenario.seed,
            config_hash: config_hash(effective_config)?,
            tool_version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
            effective_config: effective_config.clone(),
        })
    }
}

/// Hash of the canonical TOML rendering, framed like a git blob
/// (`blob <len>\0<content>`).
pub fn config_hash(config: &ScenarioConfig) -> Result<String, CliError> {
    let text = toml::to_string(config)
        .map_err(|e| CliError::failure(format!("cannot serialise config: {e}")))?;
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", text.len()).as_bytes());
    hasher.update(text.as_bytes());
    let hex: String = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok(format!("sha256:{hex}"))
}
