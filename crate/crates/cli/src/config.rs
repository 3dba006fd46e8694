//! JSON run configuration; command-line flags take precedence over it.

use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: Option<usize>,
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub kind: Option<String>,
    #[serde(rename = "N")]
    pub count: Option<f64>,
    pub slope: Option<f64>,
    pub g: Option<f64>,
    pub ratio: Option<f64>,
    pub a0: Option<u32>,
    pub c0: Option<f64>,
    pub c_d: Option<f64>,
    pub k_lambda: Option<u32>,
    pub delta0: Option<f64>,
    pub m: Option<f64>,
    pub corona_n: Option<u32>,
    pub k_lambda_star: Option<f64>,
    pub grid_ratio: Option<f64>,
    pub eps: Option<f64>,
    pub theta_mac: Option<f64>,
    pub energies: Option<bool>,
    pub battery: Option<PathBuf>,
    pub plots_dir: Option<PathBuf>,
    pub runtimes: Option<bool>,
    pub threads: Option<usize>,
}

pub enum ConfigError {
    Io(std::io::Error),
    Invalid(String),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))
    }
}
