//! Config file (TOML, same keys as the long flags) and resource lookup.

use std::env;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

use crate::UsageError;

/// Environment variable naming the default resource directory.
pub const RESOURCES_ENV: &str = "SPEECHTAG_RESOURCES";

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    #[serde(rename = "in")]
    pub inputs: Option<Vec<PathBuf>>,
    pub out: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub format: Option<String>,
    pub to: Option<String>,
    pub lexicon: Option<Vec<PathBuf>>,
    pub rules: Option<PathBuf>,
    pub tokenizer_config: Option<PathBuf>,
    pub tokenizer_rules: Option<PathBuf>,
    pub transcription_tier: Option<String>,
    pub speaker_tier: Option<String>,
    pub psu_threshold: Option<u32>,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub jobs: Option<usize>,
    pub max_iterations: Option<usize>,
    pub l2_sigma: Option<f64>,
    pub tokens: Option<usize>,
    pub documents: Option<usize>,
    pub strata: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| UsageError(format!("--config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("--config {}: {e}", path.display())).into())
    }
}

/// `flag` if given, else the config-file value.
pub fn pick<T>(flag: Option<T>, file: &mut Option<T>) -> Option<T> {
    flag.or_else(|| file.take())
}

pub fn require<T>(value: Option<T>, flag: &str) -> anyhow::Result<T> {
    value.ok_or_else(|| UsageError(format!("missing required --{flag}")).into())
}

/// A file inside the resource directory, when the variable is set and the
/// file exists.
pub fn resource(name: &str) -> Option<PathBuf> {
    let dir = env::var_os(RESOURCES_ENV)?;
    let path = Path::new(&dir).join(name);
    path.exists().then_some(path)
}

pub fn read(path: &Path) -> anyhow::Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}
