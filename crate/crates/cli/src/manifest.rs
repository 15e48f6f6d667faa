use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance record written once per successful run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub tool_version: &'static str,
    pub started_at: String,
    pub inputs: Vec<FileDigest>,
    pub seeds: BTreeMap<&'static str, u64>,
    /// SHA-256 of the effective configuration serialised as JSON.
    pub config_digest: String,
    pub outputs: Vec<PathBuf>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().collect(),
            tool_version: env!("CARGO_PKG_VERSION"),
            started_at: chrono::Utc::now().to_rfc3339(),
            inputs: Vec::new(),
            seeds: BTreeMap::new(),
            config_digest: String::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(FileDigest { path: path.to_path_buf(), sha256: sha256_hex(&bytes) });
        Ok(())
    }

    pub fn config<T: Serialize>(&mut self, config: &T) -> Result<()> {
        self.config_digest = sha256_hex(&serde_json::to_vec(config)?);
        Ok(())
    }

    /// Writes to `path`, or as one JSON line on stderr.
    pub fn emit(&self, path: Option<&Path>) -> Result<()> {
        match path {
            Some(p) => fs::write(p, serde_json::to_string_pretty(self)? + "\n")
                .with_context(|| format!("writing manifest {}", p.display())),
            None => {
                let mut err = std::io::stderr().lock();
                writeln!(err, "{}", serde_json::to_string(self)?)?;
                Ok(())
            }
        }
    }
}
