use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::error::CliResult;
use crate::io;

#[derive(Debug, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// Record of one command run: resolved configuration, input and output
/// hashes, seed, tool version and wall-clock bounds.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn hashes(paths: &[PathBuf]) -> CliResult<Vec<FileHash>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileHash {
                path: p.display().to_string(),
                sha256: io::sha256_file(p)?,
            })
        })
        .collect()
}

pub struct ManifestBuilder {
    command: &'static str,
    config: Value,
    inputs: Vec<PathBuf>,
    seed: Option<u64>,
    started: u64,
}

impl ManifestBuilder {
    pub fn start(command: &'static str, config: Value, inputs: Vec<PathBuf>, seed: Option<u64>) -> Self {
        Self {
            command,
            config,
            inputs,
            seed,
            started: now_unix(),
        }
    }

    /// Writes `manifest.json` into `dir`, replacing any previous one.
    pub fn finish(self, dir: &Path, outputs: &[PathBuf]) -> CliResult<PathBuf> {
        let manifest = RunManifest {
            command: self.command.to_owned(),
            config: self.config,
            inputs: hashes(&self.inputs)?,
            outputs: hashes(outputs)?,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            started_unix: self.started,
            finished_unix: now_unix(),
        };
        io::write_output(dir, "manifest.json", &serde_json::to_string_pretty(&manifest)?)
    }
}
