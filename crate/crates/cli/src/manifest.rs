use crate::error::{CliError, CliResult};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::Path;

pub const TOOL: &str = "splinenet";

/// Resolved configuration and inputs of a run. Deliberately free of
/// timestamps and output paths so repeated runs produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config: &impl Serialize) -> Self {
        Manifest {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: serde_json::to_value(config).expect("configs serialize"),
            inputs: BTreeMap::new(),
        }
    }

    pub fn input(mut self, key: &str, value: impl Into<String>) -> Self {
        self.inputs.insert(key.into(), value.into());
        self
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("manifest serializes")
    }

    pub fn compact(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }

    /// First line of CSV artifacts.
    pub fn csv_comment(&self) -> String {
        format!("# manifest: {}\n", self.compact())
    }

    /// Sidecar for formats that cannot hold a comment, e.g. JSONL data.
    pub fn write_sidecar(&self, artifact: &Path) -> CliResult<()> {
        let path = sidecar_path(artifact);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}

pub fn sidecar_path(artifact: &Path) -> std::path::PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}

/// Pretty JSON with a trailing newline.
pub fn to_json_text(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("artifact serializes") + "\n"
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
