use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a subcommand; written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Fully resolved settings, defaults included.
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    /// Worker count used; has no effect on any numeric output.
    pub workers: usize,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: serde_json::Value, seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            workers: rayon_threads(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes =
            std::fs::read(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn write(&mut self, dir: &Path, outputs: Vec<String>) -> Result<(), CliError> {
        self.outputs = outputs;
        crate::write_file(dir, "manifest.json", &crate::to_json(self))?;
        Ok(())
    }
}

fn rayon_threads() -> usize {
    cwta_core::power::current_workers()
}
