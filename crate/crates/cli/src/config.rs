//! Flag/config-file merging.
//!
//! A run's settings come from an optional JSON object (`--config`) overlaid
//! with whatever flags were given on the command line. The merged object is
//! deserialized into the command's resolved settings, which reject unknown
//! keys, and echoed back in the output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    #[default]
    Human,
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Common {
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

const COMMON_KEYS: [&str; 3] = ["format", "output", "threads"];

pub fn load_config(path: Option<&Path>) -> Result<Map<String, Value>, CliError> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Input(format!(
            "config {} must hold a JSON object",
            path.display()
        ))),
        Err(e) => Err(CliError::Input(format!("config {}: {e}", path.display()))),
    }
}

/// Overlays `flags` (serialized with unset options skipped) on `file` and
/// splits the result into the common part and the command part.
pub fn resolve<T: DeserializeOwned>(
    file: Map<String, Value>,
    flags: &impl Serialize,
) -> Result<(Common, T), CliError> {
    let mut merged = file;
    match serde_json::to_value(flags).map_err(|e| CliError::Input(e.to_string()))? {
        Value::Object(map) => merged.extend(map),
        _ => unreachable!("flag structs serialize to objects"),
    }
    let mut common = Map::new();
    for key in COMMON_KEYS {
        if let Some(v) = merged.remove(key) {
            common.insert(key.to_string(), v);
        }
    }
    let common: Common = serde_json::from_value(Value::Object(common))
        .map_err(|e| CliError::Input(format!("config: {e}")))?;
    let command: T = serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Input(format!("config: {e}")))?;
    Ok((common, command))
}

/// Resolves `path` against `LOCC_OUTPUT_DIR` when it is relative.
pub fn output_path(path: &Path) -> PathBuf {
    match std::env::var_os("LOCC_OUTPUT_DIR") {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}
