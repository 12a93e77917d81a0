//! Shared file header and JSON helpers.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version of every JSON file format written by this crate.
pub const FORMAT_VERSION: u32 = 1;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: unsupported format_version {found} (expected {FORMAT_VERSION})")]
    Version { path: String, found: u32 },
}

/// Header carried by every output file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileInfo {
    pub format_version: u32,
    pub tool: String,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

impl FileInfo {
    pub fn new(split: Option<String>, config_digest: Option<String>) -> Self {
        FileInfo {
            format_version: FORMAT_VERSION,
            tool: TOOL_NAME.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            split,
            config_digest,
        }
    }
}

impl Default for FileInfo {
    fn default() -> Self {
        FileInfo::new(None, None)
    }
}

/// Pretty JSON with a trailing newline; key order follows struct field order.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    fs::write(path, to_json_string(value)).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|source| IoError::Json { path: path.display().to_string(), source })
}

pub fn check_version(path: &Path, info: &FileInfo) -> Result<(), IoError> {
    if info.format_version != FORMAT_VERSION {
        return Err(IoError::Version { path: path.display().to_string(), found: info.format_version });
    }
    Ok(())
}
