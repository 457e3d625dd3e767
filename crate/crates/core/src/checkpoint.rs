//! Trained-model checkpoints and run manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, short_hash, TrainConfig};
use crate::data::{AttributePartition, TabularDataset};
use crate::error::{Error, Result};
use crate::model::AnyModel;

pub const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub config_hash: String,
    pub config: TrainConfig,
    pub partition: AttributePartition,
    pub model: AnyModel,
}

impl Checkpoint {
    pub fn new(config: TrainConfig, partition: AttributePartition, model: AnyModel) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT,
            config_hash: config.hash(),
            config,
            partition,
            model,
        }
    }

    /// Rejects data whose partition or encodings differ from training.
    pub fn check_dataset(&self, ds: &TabularDataset) -> Result<()> {
        if ds.partition != self.partition {
            return Err(Error::invalid(format!(
                "data partition does not match the checkpoint (sensitive `{}` / outcome `{}` vs `{}` / `{}`)",
                ds.partition.sensitive, ds.partition.outcome, self.partition.sensitive, self.partition.outcome
            )));
        }
        self.model.check_dataset(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Checkpoint = read_json(path)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::invalid(format!(
                "{}: checkpoint format {} is not supported (expected {CHECKPOINT_FORMAT})",
                path.display(),
                ck.format
            )));
        }
        if ck.config.hash() != ck.config_hash {
            return Err(Error::invalid(format!(
                "{}: config hash does not match its config",
                path.display()
            )));
        }
        Ok(ck)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

/// Record of one command run. Timestamps are the only non-reproducible
/// fields; `SOURCE_DATE_EPOCH` pins them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    /// Short hash over the output list, in the style of a git object id.
    pub artifact_version: String,
    pub tool_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<ManifestEntry>,
}

pub fn unix_now() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse().ok())
    {
        return t;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl RunManifest {
    /// Hashes every file in `outputs` (paths inside `dir`).
    pub fn build(
        command: &str,
        config_hash: &str,
        seed: u64,
        started_unix: u64,
        dir: &Path,
        outputs: &[PathBuf],
    ) -> Result<Self> {
        let mut entries = Vec::with_capacity(outputs.len());
        for p in outputs {
            let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
            let rel = p.strip_prefix(dir).unwrap_or(p);
            entries.push(ManifestEntry {
                path: rel.to_string_lossy().into_owned(),
                sha256: sha256_hex(&bytes),
            });
        }
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        let listing: String = entries
            .iter()
            .map(|e| format!("{} {}\n", e.sha256, e.path))
            .collect();
        Ok(RunManifest {
            command: command.into(),
            config_hash: config_hash.into(),
            seed,
            artifact_version: short_hash(listing.as_bytes())[..12].to_string(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            started_unix,
            finished_unix: unix_now(),
            outputs: entries,
        })
    }

    /// Writes `manifest.json` into `dir`, returning its path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        write_json(&path, self)?;
        Ok(path)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}
