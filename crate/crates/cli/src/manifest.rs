use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use qsm_core::io::{atomic_write, sidecar_path};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub version: String,
    pub config: RunConfig,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub wall_time_s: f64,
    pub threads: usize,
    pub details: Value,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// The file itself plus its `.qvol` sidecar when there is one.
fn records(paths: &[PathBuf]) -> Result<Vec<FileRecord>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        let mut files = vec![p.clone()];
        let side = sidecar_path(p);
        if p.extension().is_some_and(|e| e == "qvol") && side.exists() {
            files.push(side);
        }
        for f in files {
            out.push(FileRecord { path: f.display().to_string(), sha256: sha256_file(&f)? });
        }
    }
    Ok(out)
}

/// Collects what a command read and wrote while it runs.
pub struct Session {
    pub command: &'static str,
    pub config: RunConfig,
    pub details: serde_json::Map<String, Value>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    start: Instant,
}

impl Session {
    pub fn new(command: &'static str, config: RunConfig) -> Self {
        Self {
            command,
            config,
            details: serde_json::Map::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            start: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_owned());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_owned());
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details.insert(key.to_owned(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn finish(self, manifest: Option<&Path>) -> Result<Option<RunManifest>, CliError> {
        let Some(path) = manifest else {
            return Ok(None);
        };
        let m = RunManifest {
            command: self.command.to_owned(),
            args: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config: self.config,
            inputs: records(&self.inputs)?,
            outputs: records(&self.outputs)?,
            wall_time_s: self.start.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
            details: Value::Object(self.details),
        };
        let mut text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Other(e.to_string()))?;
        text.push('\n');
        atomic_write(path, text.as_bytes()).map_err(|e| CliError::input(path, e))?;
        Ok(Some(m))
    }
}
