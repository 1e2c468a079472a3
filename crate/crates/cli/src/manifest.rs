use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the config bytes (flow) or of the canonical argument JSON.
    pub config_digest: String,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    /// Every file under the output directory, this manifest included.
    pub files: Vec<String>,
    pub verdicts: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config_bytes: &[u8]) -> Self {
        RunManifest {
            command: command.to_string(),
            config_digest: sha256_hex(config_bytes),
            version: env!("CARGO_PKG_VERSION").to_string(),
            started: unix_seconds(),
            finished: 0.0,
            files: Vec::new(),
            verdicts: BTreeMap::new(),
        }
    }

    pub fn verdict(&mut self, name: &str, pass: bool) {
        self.verdicts
            .insert(name.to_string(), if pass { "pass" } else { "fail" }.to_string());
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|v| v == "pass")
    }

    /// Lists the output directory and writes the manifest into it.
    pub fn finish(mut self, out_dir: &Path) -> Result<Self, CliError> {
        let mut files = Vec::new();
        collect(out_dir, out_dir, &mut files)?;
        if !files.iter().any(|f| f == MANIFEST_NAME) {
            files.push(MANIFEST_NAME.to_string());
        }
        files.sort();
        self.files = files;
        self.finished = unix_seconds();
        write_json(&out_dir.join(MANIFEST_NAME), &self)?;
        Ok(self)
    }
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<(), CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            collect(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).unwrap_or(&path);
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
