//! Pipeline config files.

use std::path::Path;

use factcheck_core::pipeline::{ConfigError, RawPipelineConfig};
use factcheck_core::{PipelineConfig, Registry};

#[derive(Debug, thiserror::Error)]
pub enum ConfigLoadError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("unknown solver `{0}`")]
    UnknownSolver(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl From<ConfigError> for ConfigLoadError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Parse(m) => ConfigLoadError::Parse(m),
            ConfigError::UnknownSolver(n) => ConfigLoadError::UnknownSolver(n),
        }
    }
}

/// Parses config text and resolves it against `registry`.
pub fn load_pipeline_config(source: &str, registry: &Registry) -> Result<PipelineConfig, ConfigLoadError> {
    let raw: RawPipelineConfig = serde_yaml::from_str(source).map_err(|e| ConfigLoadError::Parse(e.to_string()))?;
    Ok(PipelineConfig::resolve(raw, registry)?)
}

pub fn load_pipeline_config_file(path: &Path, registry: &Registry) -> Result<PipelineConfig, ConfigLoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigLoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_pipeline_config(&text, registry)
}
