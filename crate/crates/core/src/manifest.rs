//! Run manifests: every CLI command writes one next to its outputs, capturing
//! the resolved parameters needed to replay the run byte-identically.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{atomic_write, created_stamp};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub tool_version: String,
    pub command: String,
    pub created: String,
    /// Fully resolved command parameters. For generated data this embeds the
    /// generator spec itself; for file inputs it records their paths.
    pub parameters: serde_json::Value,
    /// Files the run read, relative to the invoking directory.
    pub inputs: Vec<String>,
    /// Files the run wrote, relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, parameters: serde_json::Value) -> Self {
        RunManifest {
            format_version: MANIFEST_FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            created: created_stamp(),
            parameters,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        atomic_write(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let dir = std::env::temp_dir().join(format!("promor-man-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.manifest.json");
        let mut m = RunManifest::new("generate", serde_json::json!({"seed": 7}));
        m.outputs.push("ensemble.csv".into());
        m.save(&path).unwrap();
        let back = RunManifest::load(&path).unwrap();
        assert_eq!(back.command, "generate");
        assert_eq!(back.parameters["seed"], 7);
        assert_eq!(back.outputs, vec!["ensemble.csv"]);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
