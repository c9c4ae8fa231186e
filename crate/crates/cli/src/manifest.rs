use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Provenance of one run. Exactly one is written per invocation, as `manifest.json`
/// in the output directory.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    /// Merged `key = value` configuration, sorted by key.
    pub config: String,
    pub seed: Option<u64>,
    pub versions: Versions,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<OutputDigest>,
    pub exit_code: i32,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub pseudocal: &'static str,
    pub cli: &'static str,
}

impl Versions {
    pub fn current() -> Self {
        Versions { pseudocal: pseudocal::VERSION, cli: env!("CARGO_PKG_VERSION") }
    }
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects written files so the manifest can list their digests.
#[derive(Debug)]
pub struct OutputDir {
    pub root: PathBuf,
    written: Vec<OutputDigest>,
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(OutputDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
        let path = self.root.join(name);
        std::fs::write(&path, bytes)?;
        self.written.push(OutputDigest {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn into_digests(self) -> Vec<OutputDigest> {
        self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
