//! Run manifests: enough provenance to reproduce any output bitwise.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    /// SHA-256 over the config file bytes and the effective master seed.
    pub config_hash: String,
    /// SHA-256 of any input files consumed (keyed by path).
    pub input_hashes: BTreeMap<String, String>,
    pub master_seed: u64,
    /// Where the seed came from: "config", "flag" or "env".
    pub seed_source: String,
    pub workers: usize,
    /// Derived per-task seeds (task label -> seed).
    pub task_seeds: BTreeMap<String, u64>,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
    /// Subcommand-specific metadata (survival counts, proxy radii, modes).
    pub extra: serde_json::Value,
}

impl RunManifest {
    pub fn new(subcommand: &str, config_bytes: &[u8], master_seed: u64, seed_source: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(config_bytes);
        hasher.update(master_seed.to_le_bytes());
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            config_hash: hex_digest(hasher),
            input_hashes: BTreeMap::new(),
            master_seed,
            seed_source: seed_source.to_string(),
            workers: 0,
            task_seeds: BTreeMap::new(),
            wall_clock_seconds: 0.0,
            outputs: Vec::new(),
            extra: serde_json::Value::Null,
        }
    }

    pub fn record_input(&mut self, path: &Path, bytes: &[u8]) {
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        self.input_hashes
            .insert(path.display().to_string(), hex_digest(hasher));
    }

    /// Write atomically: temp file in the same directory, then rename.
    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let body = serde_json::to_vec_pretty(self).expect("manifest serializes");
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, body)?;
        fs::rename(&tmp, path)
    }
}

pub fn hex_digest(hasher: Sha256) -> String {
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
