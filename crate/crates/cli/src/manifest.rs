//! Run manifests.
//!
//! Each output directory gets one `manifest.json` describing the command,
//! its fully resolved configuration, the base seed, the tool version and the
//! SHA-256 of every input file. No timestamps or absolute paths are stored,
//! so identical runs produce identical manifests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::formats::{read_bytes, write_json};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_snapshot: serde_json::Value,
    pub seed: u64,
    pub tool_version: String,
    /// Input path as given → lowercase hex SHA-256 of its contents.
    pub input_digests: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config_snapshot: serde_json::Value, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config_snapshot,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            input_digests: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, stage: &str, path: &Path) -> Result<(), CliError> {
        let bytes = read_bytes(stage, path)?;
        self.input_digests
            .insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        write_json(&self.command, &dir.join(MANIFEST_FILE), self)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
