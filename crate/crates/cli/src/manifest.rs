use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub timings_ms: BTreeMap<String, u64>,
}

/// Output directory of one command. Files registered through [`Self::file`]
/// are deleted again unless [`Self::finish`] writes the manifest.
pub struct ArtifactDir {
    dir: PathBuf,
    outputs: Vec<PathBuf>,
    manifest: RunManifest,
    started: Instant,
    finished: bool,
}

impl ArtifactDir {
    pub fn create(dir: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let manifest_path = dir.join(MANIFEST_NAME);
        if manifest_path.exists() {
            fs::remove_file(&manifest_path)?;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
            manifest: RunManifest {
                command: command.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                config: Value::Null,
                seeds: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                timings_ms: BTreeMap::new(),
            },
            started: Instant::now(),
            finished: false,
        })
    }

    pub fn file(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.outputs.push(p.clone());
        p
    }

    pub fn config(&mut self, config: impl Serialize) -> Result<()> {
        self.manifest.config = serde_json::to_value(config)?;
        Ok(())
    }

    pub fn seed(&mut self, name: &str, seed: u64) {
        self.manifest.seeds.insert(name.to_string(), seed);
    }

    pub fn input(&mut self, path: &Path) {
        self.manifest.inputs.push(path.to_path_buf());
    }

    pub fn timing(&mut self, phase: &str, since: Instant) {
        self.manifest
            .timings_ms
            .insert(phase.to_string(), since.elapsed().as_millis() as u64);
    }

    pub fn finish(mut self) -> Result<()> {
        self.manifest.outputs = self.outputs.clone();
        let total = self.started;
        self.timing("total", total);
        fs::write(
            self.dir.join(MANIFEST_NAME),
            serde_json::to_vec_pretty(&self.manifest)?,
        )?;
        self.finished = true;
        Ok(())
    }
}

impl Drop for ArtifactDir {
    fn drop(&mut self) {
        if !self.finished {
            for p in &self.outputs {
                let _ = fs::remove_file(p);
            }
        }
    }
}
