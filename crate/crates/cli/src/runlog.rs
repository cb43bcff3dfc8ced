//! Run manifests: resolved configuration plus input checksums, written next
//! to every output. Nothing time- or machine-dependent goes in, so identical
//! runs produce identical manifests.

use std::fs::File;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub role: &'static str,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: Value,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &'static str, config: Value) -> Self {
        Self {
            tool: "gmdalign",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, role: &'static str, path: &Path) -> Result<[u8; 32], CliError> {
        let digest = sha256_file(path)?;
        self.inputs.push(InputFile {
            role,
            path: path.display().to_string(),
            sha256: hex::encode(digest),
        });
        Ok(digest)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))
    }
}

pub fn sha256_file(path: &Path) -> Result<[u8; 32], CliError> {
    let mut file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    io::copy(&mut file, &mut hasher).map_err(|e| CliError::io(path, e))?;
    Ok(hasher.finalize().into())
}

/// Seed derived from a checksum when the user did not pass one.
pub fn derive_seed(digest: &[u8; 32]) -> u64 {
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
