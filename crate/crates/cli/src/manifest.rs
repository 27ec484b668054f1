use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Reproducibility record written next to the artifacts of every command.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    /// SHA-256 of the effective configuration as JSON.
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started: String,
    pub finished: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_file(path: &Path) -> Result<FileDigest> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {} for the manifest", path.display()))?;
    Ok(FileDigest { path: path.display().to_string(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 })
}

pub struct ManifestBuilder {
    command: String,
    args: Vec<String>,
    config_sha256: String,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: String,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl ManifestBuilder {
    pub fn new(command: &str, args: Vec<String>, config: &impl Serialize) -> Result<Self> {
        let json = serde_json::to_vec(config)?;
        Ok(Self {
            command: command.into(),
            args,
            config_sha256: sha256_hex(&json),
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: now(),
        })
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn finish(self) -> Result<RunManifest> {
        let inputs = self.inputs.iter().map(|p| digest_file(p)).collect::<Result<_>>()?;
        let outputs = self.outputs.iter().map(|p| digest_file(p)).collect::<Result<_>>()?;
        Ok(RunManifest {
            tool: "mrsmnts".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command,
            args: self.args,
            config_sha256: self.config_sha256,
            seed: self.seed,
            inputs,
            outputs,
            started: self.started,
            finished: now(),
        })
    }
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing manifest {}", path.display()))
    }
}
