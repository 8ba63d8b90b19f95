//! Run manifest written beside every output as `<output>.manifest.json`.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path, bytes: &[u8]) -> Self {
        Self {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects what a command read and wrote.
#[derive(Debug, Default, Serialize)]
pub struct Manifest {
    pub command_line: Vec<String>,
    pub config: Option<FileDigest>,
    pub seeds: Vec<u64>,
    pub version: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Warnings and conventions that apply to the outputs.
    pub notes: Vec<String>,
    pub timestamp_unix: u64,
}

impl Manifest {
    pub fn new(command_line: Vec<String>, config: Option<FileDigest>) -> Self {
        Self {
            command_line,
            config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            ..Self::default()
        }
    }

    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.inputs.push(FileDigest::of(path, &bytes));
        Ok(bytes)
    }

    pub fn read_text(&mut self, path: &Path) -> Result<String> {
        let bytes = self.read(path)?;
        String::from_utf8(bytes).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_file(path, bytes)?;
        self.outputs.push(FileDigest::of(path, bytes));
        Ok(())
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        eprintln!("note: {msg}");
        self.notes.push(msg);
    }

    /// Write the manifest beside `primary`.
    pub fn finish(mut self, primary: &Path) -> Result<PathBuf> {
        self.timestamp_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let path = manifest_path(primary);
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        write_file(&path, text.as_bytes())?;
        Ok(path)
    }
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    sibling(primary, "manifest.json")
}

/// `<path>.<suffix>`, keeping the original extension.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
