use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Provenance record written once per run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    /// Input path to hex sha256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub seed: u64,
    pub version: String,
    pub duration_seconds: f64,
}

pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    seed: u64,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: &impl Serialize, seed: u64) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            seed,
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs
            .insert(path.display().to_string(), hex::encode(Sha256::digest(bytes)));
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn finish(self) -> RunManifest {
        RunManifest {
            command: self.command,
            config: self.config,
            inputs: self.inputs,
            outputs: self.outputs,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_seconds: self.started.elapsed().as_secs_f64(),
        }
    }
}

/// Where the manifest of a run goes: next to a directory or file output, or
/// to stderr when results went to stdout.
pub enum ManifestSink {
    File(PathBuf),
    Stderr,
}

impl ManifestSink {
    pub fn for_dir(dir: &Path) -> Self {
        ManifestSink::File(dir.join("manifest.json"))
    }

    pub fn for_file(out: Option<&Path>) -> Self {
        match out {
            Some(p) => {
                let mut name = p.as_os_str().to_owned();
                name.push(".manifest.json");
                ManifestSink::File(PathBuf::from(name))
            }
            None => ManifestSink::Stderr,
        }
    }

    pub fn write(&self, manifest: &RunManifest) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n";
        match self {
            ManifestSink::File(p) => fs::write(p, text).map_err(|e| CliError::input(p.display(), e)),
            ManifestSink::Stderr => std::io::stderr()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::input("stderr", e)),
        }
    }
}
