//! Run manifests: every command records its resolved configuration and a
//! checksum for each file it wrote; `saa verify` recomputes them.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub artifact_version: String,
    pub command: String,
    pub seed: u64,
    pub workers: usize,
    /// Resolved configuration (environment inlined, seed applied).
    pub config: serde_json::Value,
    pub outputs: Vec<OutputRecord>,
    pub elapsed_ms: u64,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Collects data outputs as they are written and finalizes the manifest.
pub struct ManifestBuilder {
    command: String,
    seed: u64,
    workers: usize,
    config: serde_json::Value,
    out_dir: PathBuf,
    outputs: Vec<OutputRecord>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(
        command: &str,
        seed: u64,
        workers: usize,
        config: serde_json::Value,
        out_dir: &Path,
    ) -> Result<Self, CliError> {
        std::fs::create_dir_all(out_dir)?;
        Ok(ManifestBuilder {
            command: command.to_string(),
            seed,
            workers,
            config,
            out_dir: out_dir.to_path_buf(),
            outputs: Vec::new(),
            started: Instant::now(),
        })
    }

    /// Writes one data output under the run directory and records it.
    pub fn write_output(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents)?;
        self.outputs.push(OutputRecord {
            path: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
            bytes: contents.len() as u64,
        });
        Ok(())
    }

    pub fn finish(self) -> Result<(), CliError> {
        let manifest = RunManifest {
            schema_version: crate::config::SCHEMA_VERSION,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            seed: self.seed,
            workers: self.workers,
            config: self.config,
            outputs: self.outputs,
            elapsed_ms: self.started.elapsed().as_millis() as u64,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(self.out_dir.join(MANIFEST_NAME), text)?;
        Ok(())
    }
}

/// Recomputes every checksum listed in `dir`'s manifest. Returns the
/// number of verified files.
pub fn verify_dir(dir: &Path) -> Result<usize, CliError> {
    let manifest_path = dir.join(MANIFEST_NAME);
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| {
        CliError::Incomplete(format!("manifest {}: {e}", manifest_path.display()))
    })?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Incomplete(format!("manifest parse: {e}")))?;
    for record in &manifest.outputs {
        let path = dir.join(&record.path);
        let bytes = std::fs::read(&path).map_err(|e| {
            CliError::Incomplete(format!("listed output {}: {e}", path.display()))
        })?;
        let found = sha256_hex(&bytes);
        if found != record.sha256 {
            return Err(CliError::Incomplete(format!(
                "checksum mismatch for {}: manifest {} found {}",
                record.path, record.sha256, found
            )));
        }
    }
    Ok(manifest.outputs.len())
}
