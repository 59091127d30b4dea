use std::fmt::Display;
use std::path::Path;

use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    Input { kind: &'static str, message: String },
    Internal(String),
}

impl CliError {
    pub fn input(kind: &'static str, message: impl Display) -> Self {
        CliError::Input { kind, message: message.to_string() }
    }

    pub fn io(path: &Path, e: impl Display) -> Self {
        CliError::input("io", format!("{}: {e}", path.display()))
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Input { .. } => 1,
            CliError::Internal(_) => 2,
        }
    }

    /// Single-line JSON.
    pub fn to_json(&self) -> String {
        match self {
            CliError::Input { kind, message } => json!({ "error": "input", "kind": kind, "message": message }),
            CliError::Internal(m) => json!({ "error": "internal", "kind": "internal", "message": m }),
        }
        .to_string()
    }
}

pub fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn to_json_pretty(v: &impl serde::Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| CliError::Internal(e.to_string()))
}
