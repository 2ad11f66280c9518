//! Output directory ownership, checksums and the run manifest.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{ErrorKind, Read};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const LOCK_NAME: &str = ".psipi.lock";
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub experiment: String,
    pub config: RunConfig,
    /// File name → SHA-256 (hex) of every output written by the run.
    pub files: BTreeMap<String, String>,
    pub created_unix_s: u64,
}

/// Exclusive handle on an output directory; the lockfile is removed on drop.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Numerical(format!("{}: {e}", path.display()))
}

impl OutputDir {
    pub fn acquire(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::config(format!("cannot create {}: {e}", root.display())))?;
        let lock = root.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(_) => Ok(Self { root: root.to_path_buf(), files: Vec::new() }),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(CliError::config(format!(
                "output directory {} is in use by another run (remove {} if stale)",
                root.display(),
                lock.display()
            ))),
            Err(e) => Err(io_err(&lock, e)),
        }
    }

    /// Path for a new output file, recorded for the manifest.
    pub fn file(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.root.join(name)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.file(name);
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    pub fn finish(self, config: &RunConfig) -> Result<Manifest, CliError> {
        let mut files = BTreeMap::new();
        for name in &self.files {
            let path = self.root.join(name);
            files.insert(name.clone(), sha256_file(&path).map_err(|e| io_err(&path, e))?);
        }
        let manifest = Manifest {
            tool: "psipi".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            core_version: psipi::VERSION.into(),
            experiment: config.experiment.map(|e| e.to_string()).unwrap_or_default(),
            config: config.clone(),
            files,
            created_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        psipi::io::write_json(self.root.join(MANIFEST_NAME), &manifest)?;
        Ok(manifest)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.root.join(LOCK_NAME));
    }
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut hasher = Sha256::new();
    let mut f = File::open(path)?;
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let a = OutputDir::acquire(dir.path()).unwrap();
        assert!(OutputDir::acquire(dir.path()).is_err());
        drop(a);
        assert!(OutputDir::acquire(dir.path()).is_ok());
    }

    #[test]
    fn manifest_lists_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::acquire(dir.path()).unwrap();
        out.write_text("a.txt", "abc").unwrap();
        let cfg = RunConfig::default();
        let m = out.finish(&cfg).unwrap();
        assert_eq!(m.files["a.txt"], "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        let back: Manifest = psipi::io::read_json(dir.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(back, m);
        assert!(!dir.path().join(LOCK_NAME).exists());
    }
}
