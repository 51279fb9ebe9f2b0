use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::io::{write_json, IoError};

/// Everything needed to replay a run, written before the work starts and
/// rewritten with `finished_unix_s` when it ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: Vec<String>,
    pub seed: u64,
    pub config: serde_json::Value,
    pub workers: usize,
    pub outputs: BTreeMap<String, PathBuf>,
    pub started_unix_s: u64,
    #[serde(default)]
    pub finished_unix_s: Option<u64>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: Vec<String>, seed: u64, config: serde_json::Value, workers: usize) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command,
            seed,
            config,
            workers,
            outputs: BTreeMap::new(),
            started_unix_s: unix_now(),
            finished_unix_s: None,
        }
    }

    pub fn output(mut self, name: &str, path: &Path) -> Self {
        self.outputs.insert(name.into(), path.to_path_buf());
        self
    }

    pub fn write(&self, path: &Path, force: bool) -> Result<(), IoError> {
        write_json(path, self, force)
    }

    pub fn finish(&mut self, path: &Path) -> Result<(), IoError> {
        self.finished_unix_s = Some(unix_now());
        write_json(path, self, true)
    }
}
