//! Run manifest. Its hash depends only on the config bytes, the effective
//! seed and the tool version, so reruns reproduce every data file exactly.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::LoadedConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub hash: String,
    pub command: String,
    pub config_path: String,
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    pub out_dir: String,
    pub outputs: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub fn manifest_hash(config_bytes: &[u8], seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(config_bytes);
    h.update(seed.to_le_bytes());
    h.update(VERSION.as_bytes());
    hex(&h.finalize())
}

impl Manifest {
    pub fn new(command: &str, cfg: &LoadedConfig, out: &Path) -> Self {
        Self {
            hash: manifest_hash(&cfg.bytes, cfg.config.seed),
            command: command.to_string(),
            config_path: cfg.path.display().to_string(),
            config_sha256: hex(&Sha256::digest(&cfg.bytes)),
            seed: cfg.config.seed,
            version: VERSION.to_string(),
            out_dir: out.display().to_string(),
            outputs: Vec::new(),
            started_unix: now(),
            finished_unix: None,
        }
    }

    pub fn finish(&mut self) -> Vec<u8> {
        self.finished_unix = Some(now());
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text.into_bytes()
    }
}
