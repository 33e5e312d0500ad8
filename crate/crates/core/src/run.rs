//! The run directory: artifact paths, JSON/JSONL I/O and the advisory lock.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{FindrError, Result};
use crate::store::{write_atomic, ContentStore};

pub const LOCK_FILE: &str = ".findr.lock";
pub const CONFIG_LOCK: &str = "config.lock.json";
pub const META: &str = "meta.json";
pub const CANDIDATES: &str = "candidates.jsonl";
pub const VOCABULARY: &str = "vocabulary.json";
pub const REFINED: &str = "refined.json";
pub const CLASSIFIER: &str = "classifier.json";
pub const PREDICTIONS: &str = "predictions.jsonl";
pub const SKIPPED: &str = "skipped.jsonl";
pub const REPORT: &str = "report.json";
pub const ABLATE_ALPHA: &str = "ablate_alpha.csv";
pub const ABLATE_ROBUSTNESS: &str = "ablate_robustness.csv";

/// An opened run directory. Holds the lock file until dropped.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    lock: PathBuf,
}

impl RunDir {
    /// Creates the directory if needed and takes the advisory lock, failing
    /// fast when another invocation holds it.
    pub fn open(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| FindrError::io(root, e))?;
        let lock = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => return Err(FindrError::Locked(lock)),
            Err(e) => return Err(FindrError::io(&lock, e)),
        }
        Ok(RunDir {
            root: root.to_path_buf(),
            lock,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn chat_cache(&self) -> ContentStore {
        ContentStore::new(self.root.join("cache").join("chat"))
    }

    pub fn embed_cache(&self) -> ContentStore {
        ContentStore::new(self.root.join("cache").join("embed"))
    }

    /// Fails with the artifact's path when it has not been produced yet.
    pub fn require(&self, name: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(FindrError::MissingArtifact(p))
        }
    }

    pub fn read_json<T: DeserializeOwned>(&self, name: &str) -> Result<T> {
        let p = self.require(name)?;
        let bytes = fs::read(&p).map_err(|e| FindrError::io(&p, e))?;
        serde_json::from_slice(&bytes).map_err(|e| FindrError::Validation(format!("{}: {e}", p.display())))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    pub fn read_jsonl<T: DeserializeOwned>(&self, name: &str) -> Result<Vec<T>> {
        let p = self.require(name)?;
        let text = fs::read_to_string(&p).map_err(|e| FindrError::io(&p, e))?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| FindrError::Validation(format!("{}:{}: {e}", p.display(), i + 1)))
            })
            .collect()
    }

    pub fn write_jsonl<T: Serialize>(&self, name: &str, items: &[T]) -> Result<PathBuf> {
        let mut bytes = Vec::new();
        for item in items {
            serde_json::to_writer(&mut bytes, item)?;
            bytes.push(b'\n');
        }
        self.write_bytes(name, &bytes)
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.path(name);
        write_atomic(&p, bytes)?;
        Ok(p)
    }

    /// Records the configuration. A run directory belongs to one
    /// configuration: a different one is refused.
    pub fn snapshot_config(&self, cfg: &RunConfig) -> Result<()> {
        let p = self.path(CONFIG_LOCK);
        if p.is_file() {
            let existing: RunConfig = self.read_json(CONFIG_LOCK)?;
            if &existing != cfg {
                return Err(FindrError::Validation(format!(
                    "{} was created with a different configuration (see {})",
                    self.root.display(),
                    p.display()
                )));
            }
            return Ok(());
        }
        self.write_json(CONFIG_LOCK, cfg)?;
        Ok(())
    }

    /// The configuration recorded in the run directory.
    pub fn locked_config(&self) -> Result<RunConfig> {
        let cfg: RunConfig = self.read_json(CONFIG_LOCK)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}
