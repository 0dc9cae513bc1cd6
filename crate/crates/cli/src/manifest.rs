//! Run manifest: what each stage read, wrote and how long it took.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::artifacts::{sha256_file, write_atomic};

pub const MANIFEST_FILE: &str = "manifest.json";
/// Bumped whenever an artifact layout changes.
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub status: Status,
    pub params_hash: String,
    /// Input path -> SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output path relative to the output directory -> SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: u32,
    pub config_hash: String,
    pub status: Status,
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    pub fn new(config_hash: String) -> Self {
        RunManifest { artifact_version: ARTIFACT_VERSION, config_hash, status: Status::Running, stages: BTreeMap::new() }
    }

    /// Loads the manifest in `dir`, or starts a fresh one when it is
    /// missing, unreadable or from another artifact version.
    pub fn load_or_new(dir: &Path, config_hash: String) -> Self {
        let path = dir.join(MANIFEST_FILE);
        let loaded = std::fs::read(&path)
            .ok()
            .and_then(|b| serde_json::from_slice::<RunManifest>(&b).ok())
            .filter(|m| m.artifact_version == ARTIFACT_VERSION);
        match loaded {
            Some(mut m) => {
                m.config_hash = config_hash;
                m
            }
            None => RunManifest::new(config_hash),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join(MANIFEST_FILE), |w| {
            serde_json::to_writer_pretty(&mut *w, self)?;
            w.write_all(b"\n")?;
            Ok(())
        })
        .context("saving manifest")
    }

    /// True when `stage` completed with the same parameters and inputs and
    /// every recorded output is still on disk unchanged.
    pub fn is_fresh(&self, stage: &str, params_hash: &str, inputs: &BTreeMap<String, String>, dir: &Path) -> bool {
        let Some(rec) = self.stages.get(stage) else { return false };
        rec.status == Status::Complete
            && rec.params_hash == params_hash
            && &rec.inputs == inputs
            && rec.outputs.iter().all(|(rel, sum)| sha256_file(&dir.join(rel)).is_ok_and(|s| &s == sum))
    }
}

/// Checksums for a set of input files keyed by their display path.
pub fn checksum_inputs<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<BTreeMap<String, String>> {
    paths.into_iter().map(|p| Ok((p.display().to_string(), sha256_file(p)?))).collect()
}
