//! Run manifest: config hash plus the artifacts each finished stage wrote,
//! with their SHA-256 digests. Later stages refuse to run when an upstream
//! record is missing, belongs to another config, or its files changed.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Stage names in pipeline order.
pub const STAGES: [&str; 6] = ["gen-prior", "simulate", "train-ccr", "invert", "metrics", "plot-data"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the run directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    #[serde(default)]
    pub stages: Vec<StageRecord>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

impl Manifest {
    pub fn new(config_hash: &str) -> Self {
        Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.to_string(),
            stages: Vec::new(),
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Err(Error::MissingArtifact(path));
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// The manifest of `dir` if it matches `config_hash`, otherwise a fresh one.
    pub fn open_or_new(dir: &Path, config_hash: &str) -> Result<Self> {
        match Manifest::load(dir) {
            Ok(m) if m.config_hash == config_hash => Ok(m),
            Ok(_) | Err(Error::MissingArtifact(_)) => Ok(Manifest::new(config_hash)),
            Err(e) => Err(e),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = toml::to_string(self).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    /// Hash `files` (relative to `dir`) and record them under `name`, keeping
    /// stages in pipeline order.
    pub fn record(&mut self, dir: &Path, name: &str, files: &[String]) -> Result<()> {
        let artifacts = files
            .iter()
            .map(|f| {
                Ok(Artifact {
                    path: f.clone(),
                    sha256: sha256_file(&dir.join(f))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.stages.retain(|s| s.name != name);
        self.stages.push(StageRecord {
            name: name.to_string(),
            artifacts,
        });
        let rank = |n: &str| STAGES.iter().position(|s| *s == n).unwrap_or(STAGES.len());
        self.stages.sort_by_key(|s| rank(&s.name));
        Ok(())
    }

    /// Check that `name` finished under this config and its files are intact.
    pub fn require(&self, dir: &Path, config_hash: &str, name: &str) -> Result<()> {
        if self.config_hash != config_hash {
            return Err(Error::Config(format!(
                "run directory {} belongs to a different configuration; rerun gen-prior",
                dir.display()
            )));
        }
        let stage = self
            .stage(name)
            .ok_or_else(|| Error::Config(format!("stage {name} has not been run in {}", dir.display())))?;
        for a in &stage.artifacts {
            let path = dir.join(&a.path);
            if !path.exists() {
                return Err(Error::MissingArtifact(path));
            }
            if sha256_file(&path)? != a.sha256 {
                return Err(Error::Config(format!("artifact {} changed since stage {name} wrote it", a.path)));
            }
        }
        Ok(())
    }
}
