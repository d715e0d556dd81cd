//! Optional TOML config file; command-line flags override its values.

use std::path::Path;

use gfk_core::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub hu_threshold: Option<f64>,
    pub closing_mm: Option<f64>,
    pub flip_lr: Option<bool>,
    pub match_radius: Option<bool>,
    pub fusion_mode: Option<String>,
    pub attention_threshold: Option<f64>,
    pub fp_target: Option<f64>,
    pub seed: Option<u64>,
    pub scans: Option<usize>,
    pub annotators: Option<usize>,
    pub f: Option<f64>,
    pub jobs: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("config {}: {e}", p.display())))
            }
        }
    }
}

/// Flags win over config values, config over defaults.
pub fn pick<T: Copy>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}
