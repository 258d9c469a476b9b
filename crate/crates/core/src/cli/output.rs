//! Output directories: exclusive lock while a command writes, and a
//! manifest describing the run once it is done.

use std::fs::{self, File, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::write_json;

pub const MANIFEST_FILE: &str = "thermofuse-manifest.json";
pub const LOCK_FILE: &str = ".thermofuse.lock";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Written last into every output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// SHA-256 of the canonical JSON of `config`.
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

/// An output directory held for the lifetime of the value.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    lock: PathBuf,
    _file: File,
}

impl OutputDir {
    /// Create `dir` if needed and take its lock. Fails if another run holds
    /// it.
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let lock = dir.join(LOCK_FILE);
        let file = match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(f) => f,
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                return Err(Error::Config(format!(
                    "output directory {} is locked by another run (remove {} if stale)",
                    dir.display(),
                    lock.display()
                )))
            }
            Err(e) => return Err(Error::io(&lock, e)),
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            lock,
            _file: file,
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn join(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Hash every regular file in the directory, sorted by name, and write
    /// the manifest.
    pub fn finish<C: Serialize>(self, command: &str, seed: u64, config: &C, inputs: &[&Path]) -> Result<RunManifest> {
        let config = serde_json::to_value(config).map_err(|e| Error::Json {
            path: self.join(MANIFEST_FILE),
            source: e,
        })?;
        let canonical = serde_json::to_vec(&config).expect("JSON value serializes");
        let mut names: Vec<String> = fs::read_dir(&self.dir)
            .map_err(|e| Error::io(&self.dir, e))?
            .filter_map(|entry| entry.ok())
            .filter(|entry| entry.file_type().is_ok_and(|t| t.is_file()))
            .map(|entry| entry.file_name().to_string_lossy().into_owned())
            .filter(|n| n != MANIFEST_FILE && n != LOCK_FILE)
            .collect();
        names.sort();
        let outputs = names
            .iter()
            .map(|n| {
                let mut d = file_digest(&self.dir.join(n))?;
                d.path = n.clone();
                Ok(d)
            })
            .collect::<Result<Vec<_>>>()?;
        let inputs = inputs.iter().map(|p| file_digest(p)).collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config_sha256: sha256_hex(&canonical),
            config,
            inputs,
            outputs,
        };
        write_json(&self.join(MANIFEST_FILE), &manifest)?;
        Ok(manifest)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::acquire(dir.path()).unwrap();
        assert!(matches!(OutputDir::acquire(dir.path()), Err(Error::Config(_))));
        fs::write(out.join("a.txt"), b"abc").unwrap();
        let m = out.finish("test", 7, &serde_json::json!({"k": 1}), &[]).unwrap();
        assert!(!dir.path().join(LOCK_FILE).exists());
        assert_eq!(m.outputs.len(), 1);
        assert_eq!(m.outputs[0].sha256, sha256_hex(b"abc"));
        assert_eq!(m.config_sha256, sha256_hex(br#"{"k":1}"#));
        OutputDir::acquire(dir.path()).unwrap();
    }
}
