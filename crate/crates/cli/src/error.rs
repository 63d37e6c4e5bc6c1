use std::fmt;
use std::path::Path;

use membrane_core::campaign::CampaignError;
use membrane_core::evolve::ConfigError;
use membrane_core::reeb::ReebError;
use membrane_core::{GenomeError, MeshError};
use serde::Serialize;

/// Error shape shared by the CLI (stderr) and the HTTP API (response body).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CliError {
    pub code: String,
    pub message: String,
}

impl CliError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        CliError {
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::new("io-error", format!("{}: {e}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<CampaignError> for CliError {
    fn from(e: CampaignError) -> Self {
        CliError::new(e.code(), e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::new(e.code(), e.to_string())
    }
}

impl From<GenomeError> for CliError {
    fn from(e: GenomeError) -> Self {
        CliError::new(e.code(), e.to_string())
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        let code = match e {
            MeshError::Unprintable(_) => "unprintable",
            _ => "mesh-error",
        };
        CliError::new(code, e.to_string())
    }
}

impl From<ReebError> for CliError {
    fn from(e: ReebError) -> Self {
        CliError::new("reeb-error", e.to_string())
    }
}
