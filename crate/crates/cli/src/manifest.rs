use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// Everything needed to re-derive an output: command, parameters, input
/// digests and tool version. Contains no timestamps or host details.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    pub inputs: Vec<InputDigest>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            parameters: BTreeMap::new(),
            inputs: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<&mut Self> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.inputs.push(InputDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// `key = value` lines for text reports.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "[manifest]\ntool = {} {}\ncommand = {}\n",
            self.tool, self.version, self.command
        );
        for (k, v) in &self.parameters {
            s.push_str(&format!("param.{k} = {v}\n"));
        }
        for i in &self.inputs {
            s.push_str(&format!("input.{} = {} sha256:{}\n", i.role, i.path, i.sha256));
        }
        s
    }

    pub fn sidecar_path(output: &Path) -> PathBuf {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    /// Writes `<output>.manifest.json` next to a data file.
    pub fn write_sidecar(&self, output: &Path) -> Result<()> {
        let path = Self::sidecar_path(output);
        fs::write(&path, self.to_json() + "\n")
            .with_context(|| format!("cannot write {}", path.display()))
    }
}
