//! Run manifests: every file the binary writes carries the arguments that
//! produced it, so a result can be reproduced from the artifact alone.

use serde::Serialize;
use serde_json::{json, Map, Value};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Provenance block embedded in every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    /// Subcommand that produced the file.
    pub command: String,
    /// Binary version at the time of the run.
    pub version: String,
    /// RNG seed, when the command consumed one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Echo of the parsed command-line configuration.
    pub config: Value,
    /// "pass", "fail", or "generated".
    pub outcome: String,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config: Value, outcome: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            outcome: outcome.to_string(),
        }
    }

    /// Envelope `{"manifest": ..., key: payload}` with the manifest first.
    pub fn envelope(&self, key: &str, payload: Value) -> Value {
        let mut map = Map::new();
        map.insert("manifest".to_string(), json!(self));
        map.insert(key.to_string(), payload);
        Value::Object(map)
    }

    /// Single-line JSON form used inside CSV comment headers.
    pub fn compact(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }
}

/// Resolve `name` under the output directory, creating the directory on demand.
pub fn prepare(output: &Path, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(output).map_err(|e| CliError::io(output, e))?;
    Ok(output.join(name))
}

/// Pretty-print a JSON value to `path` with a trailing newline.
pub fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Write a text artifact (CSV and friends) verbatim.
pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    file.write_all(text.as_bytes())
        .map_err(|e| CliError::io(path, e))
}

/// Insert the manifest into an already-serialized JSON document, keeping the
/// document's own top-level keys (step-function files stay loadable by the
/// plain parsers, which ignore the extra key).
pub fn embed(doc: &str, manifest: &RunManifest) -> Value {
    let mut value: Value = serde_json::from_str(doc).expect("document parses");
    if let Value::Object(map) = &mut value {
        let mut with_manifest = Map::new();
        with_manifest.insert("manifest".to_string(), json!(manifest));
        for (k, v) in map.iter() {
            with_manifest.insert(k.clone(), v.clone());
        }
        return Value::Object(with_manifest);
    }
    value
}
