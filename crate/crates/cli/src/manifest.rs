use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub index: usize,
    pub delta_b: f64,
    pub t_final: f64,
    /// `"ok"` or `"failed"`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the config file bytes.
    pub config_hash: String,
    pub seed: u64,
    pub timestamp: String,
    pub jobs: Vec<JobStatus>,
    /// Output files relative to the manifest's directory.
    pub files: Vec<String>,
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    Ok(hash_bytes(&fs::read(path)?))
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String, seed: u64) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash,
            seed,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            jobs: Vec::new(),
            files: Vec::new(),
        }
    }

    /// Records `files` (which must live under `dir`) and writes the manifest.
    pub fn write(mut self, dir: &Path, files: &[PathBuf]) -> Result<PathBuf, CliError> {
        self.files = files.iter().map(|f| f.strip_prefix(dir).unwrap_or(f).to_string_lossy().into_owned()).collect();
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(|e| CliError::Io(e.to_string()))
    }

    /// Every listed file exists and is non-empty, and `config` (if given)
    /// still hashes to the recorded value.
    pub fn verify(&self, dir: &Path, config: Option<&Path>) -> Result<(), String> {
        for f in &self.files {
            match fs::metadata(dir.join(f)) {
                Ok(m) if m.len() > 0 => {}
                Ok(_) => return Err(format!("{f} is empty")),
                Err(e) => return Err(format!("{f}: {e}")),
            }
        }
        if let Some(path) = config {
            let actual = hash_file(path).map_err(|e| e.to_string())?;
            if actual != self.config_hash {
                return Err(format!("config hash {actual} differs from recorded {}", self.config_hash));
            }
        }
        Ok(())
    }
}
