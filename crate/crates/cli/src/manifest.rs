//! Per-stage manifests: content hashes of inputs and outputs plus the seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_ECHO_FILE: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub inputs_hash: String,
    pub outputs: BTreeMap<String, String>,
    pub outputs_hash: String,
}

/// Files that never take part in output hashing: the manifest itself, the
/// config echo and raw-store fetch metadata (which records fetch times).
fn excluded(name: &str) -> bool {
    name == MANIFEST_FILE || name == CONFIG_ECHO_FILE || name.ends_with(".meta.json")
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            walk(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Hashes of every file under `path` (or of `path` itself), keyed by
/// `label` plus the relative path, with `/` separators.
pub fn hash_tree(path: &Path, label: &str) -> Result<BTreeMap<String, String>> {
    let mut hashes = BTreeMap::new();
    if path.is_file() {
        hashes.insert(label.to_string(), file_sha256(path)?);
        return Ok(hashes);
    }
    let mut files = Vec::new();
    walk(path, &mut files)?;
    for f in files {
        let rel = f.strip_prefix(path).expect("walked under root");
        let name = f.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if excluded(name) {
            continue;
        }
        let key: Vec<String> = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect();
        let key = if label.is_empty() {
            key.join("/")
        } else {
            format!("{label}/{}", key.join("/"))
        };
        hashes.insert(key, file_sha256(&f)?);
    }
    Ok(hashes)
}

/// Digest over a sorted name → hash map.
pub fn combined(hashes: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    for (k, v) in hashes {
        h.update(k.as_bytes());
        h.update([0]);
        h.update(v.as_bytes());
        h.update(*b"\n");
    }
    hex::encode(h.finalize())
}

impl Manifest {
    /// Builds the manifest of a finished stage. `inputs` are labelled paths
    /// (files or directories); outputs are everything under `dir`.
    pub fn build(stage: &str, seed: u64, inputs: &[(&str, &Path)], dir: &Path) -> Result<Self> {
        let mut input_hashes = BTreeMap::new();
        for (label, path) in inputs {
            input_hashes.extend(hash_tree(path, label)?);
        }
        let outputs = hash_tree(dir, "")?;
        Ok(Manifest {
            stage: stage.to_string(),
            seed,
            inputs_hash: combined(&input_hashes),
            inputs: input_hashes,
            outputs_hash: combined(&outputs),
            outputs,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}
