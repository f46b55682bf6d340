use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to rerun a command: tool version, resolved
/// configuration, seeds and the digests of every input file.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub master_seed: u64,
    /// How per-cell or per-session seeds are derived from the master seed.
    pub seed_derivation: &'static str,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub started_unix_seconds: u64,
    pub finished_unix_seconds: u64,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of a file, or of every file in a directory in name order.
pub fn digest_inputs(path: &Path) -> Result<Vec<InputDigest>, CliError> {
    let mut files = Vec::new();
    if path.is_dir() {
        let entries = std::fs::read_dir(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        for entry in entries {
            let p = entry.map_err(|e| CliError::data(e.to_string()))?.path();
            if p.is_file() {
                files.push(p);
            }
        }
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }
    files
        .into_iter()
        .map(|p| {
            let bytes = std::fs::read(&p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
            Ok(InputDigest {
                sha256: hex(&Sha256::digest(&bytes)),
                path: p,
            })
        })
        .collect()
}

impl RunManifest {
    pub fn new(command: &str, config: impl Serialize, master_seed: u64, seed_derivation: &'static str) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_owned(),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            master_seed,
            seed_derivation,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix_seconds: unix_now(),
            finished_unix_seconds: 0,
        }
    }

    pub fn write(mut self, dir: &Path) -> Result<(), CliError> {
        self.finished_unix_seconds = unix_now();
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&self).map_err(|e| CliError::data(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }
}
