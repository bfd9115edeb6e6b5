//! Run manifests: what was run, with which inputs, and the hash of every
//! file it produced.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub config: Option<String>,
    pub seeds: Vec<u64>,
    pub versions: BTreeMap<String, String>,
    pub artifacts: Vec<Artifact>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    #[serde(skip)]
    out: PathBuf,
    #[serde(skip)]
    clock: Option<(String, Instant)>,
}

impl RunManifest {
    pub fn new(out: &Path) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("lpns".to_string(), env!("CARGO_PKG_VERSION").to_string());
        versions.insert(
            "snapshot-format".to_string(),
            String::from_utf8_lossy(lpns::snapshot::MAGIC).into_owned(),
        );
        Self {
            command: std::env::args().collect(),
            config: None,
            seeds: Vec::new(),
            versions,
            artifacts: Vec::new(),
            timings: BTreeMap::new(),
            out: out.to_path_buf(),
            clock: None,
        }
    }

    /// Starts timing `phase`, closing the previous one.
    pub fn phase(&mut self, phase: &str) {
        self.stop();
        self.clock = Some((phase.to_string(), Instant::now()));
    }

    fn stop(&mut self) {
        if let Some((name, start)) = self.clock.take() {
            self.timings.insert(name, start.elapsed().as_secs_f64());
        }
    }

    pub fn write_file(&mut self, relative: &str, contents: &[u8]) -> std::io::Result<PathBuf> {
        let path = self.out.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        self.record(&path)?;
        Ok(path)
    }

    /// Hashes a file already written under the output directory.
    pub fn record(&mut self, path: &Path) -> std::io::Result<()> {
        let bytes = fs::read(path)?;
        let rel = path.strip_prefix(&self.out).unwrap_or(path);
        self.artifacts.push(Artifact {
            path: rel.to_string_lossy().replace('\\', "/"),
            sha256: hex::encode(Sha256::digest(&bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<PathBuf> {
        self.stop();
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self).map_err(std::io::Error::other)?;
        fs::write(&path, text + "\n")?;
        Ok(path)
    }
}
