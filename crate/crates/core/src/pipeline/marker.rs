//! Content digests and per-step completion markers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Incremental SHA-256 over labelled chunks. Labels are logical names, not
/// absolute paths, so a copied output directory keeps its digests.
pub struct Digester(Sha256);

impl Default for Digester {
    fn default() -> Self {
        Self::new()
    }
}

impl Digester {
    pub fn new() -> Self {
        Self(Sha256::new())
    }

    pub fn bytes(&mut self, label: &str, data: &[u8]) {
        self.0.update((label.len() as u64).to_le_bytes());
        self.0.update(label.as_bytes());
        self.0.update((data.len() as u64).to_le_bytes());
        self.0.update(data);
    }

    pub fn file(&mut self, label: &str, path: &Path) -> Result<()> {
        let data = fs::read(path).map_err(|e| Error::io(path, e))?;
        self.bytes(label, &data);
        Ok(())
    }

    /// Every regular file below `dir`, in sorted relative-path order.
    pub fn dir(&mut self, label: &str, dir: &Path) -> Result<()> {
        for rel in list_files(dir)? {
            let name = format!("{label}/{}", rel.to_string_lossy().replace('\\', "/"));
            self.file(&name, &dir.join(&rel))?;
        }
        Ok(())
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

/// Relative paths of all regular files below `dir`, sorted. A missing
/// directory yields an empty list.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(dir).to_path_buf();
            Error::io(path, e.into())
        })?;
        if entry.file_type().is_file() {
            out.push(entry.path().strip_prefix(dir).expect("below root").to_path_buf());
        }
    }
    out.sort();
    Ok(out)
}

pub fn dir_digest(dir: &Path) -> Result<String> {
    let mut d = Digester::new();
    d.dir("", dir)?;
    Ok(d.finish())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marker {
    pub step: String,
    pub version: String,
    pub input_digest: String,
    pub output_digest: String,
}

impl Marker {
    pub fn read(path: &Path) -> Result<Option<Marker>> {
        match fs::read(path) {
            Ok(bytes) => match serde_json::from_slice(&bytes) {
                Ok(m) => Ok(Some(m)),
                Err(e) => {
                    log::warn!("ignoring unreadable marker {}: {e}", path.display());
                    Ok(None)
                }
            },
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("marker serializes");
        bytes.push(b'\n');
        crate::io::write_bytes(path, &bytes)
    }
}
