//! Run manifests: parameters, input hashes, outputs, and outcome of
//! one command — enough to re-run it bit-identically.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use voxseg::volume::sidecar_path;

/// Manifest file name used by commands that own an output directory.
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Effective flag values, defaults included.
    pub parameters: BTreeMap<String, Value>,
    /// SHA-256 of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    /// Files and directories written, in creation order.
    pub outputs: Vec<String>,
    pub version: String,
    pub duration_seconds: f64,
    pub error: Option<String>,
}

pub struct ManifestBuilder {
    command: String,
    parameters: BTreeMap<String, Value>,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            parameters: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn param(&mut self, name: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("parameter values are plain data");
        self.parameters.insert(name.to_string(), value);
    }

    /// Hash one input file.
    pub fn input_file(&mut self, path: &Path) -> Result<()> {
        let digest = file_sha256(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Hash a volume input: its sidecar plus the payload it names.
    pub fn input_volume(&mut self, path: &Path) -> Result<()> {
        let sidecar = sidecar_path(path);
        self.input_file(&sidecar)?;
        // Best effort: if the sidecar is malformed the command itself
        // will report it; the manifest then records the sidecar only.
        if let Ok(doc) = serde_json::from_str::<Value>(&fs::read_to_string(&sidecar)?) {
            if let Some(payload) = doc.get("payload").and_then(Value::as_str) {
                let dir = sidecar.parent().unwrap_or_else(|| Path::new(""));
                self.input_file(&dir.join(payload))?;
            }
        }
        Ok(())
    }

    /// Hash every file under a directory, recursively.
    pub fn input_dir(&mut self, dir: &Path) -> Result<()> {
        let mut entries: Vec<_> = fs::read_dir(dir)
            .with_context(|| format!("reading directory {}", dir.display()))?
            .collect::<std::io::Result<_>>()
            .with_context(|| format!("reading directory {}", dir.display()))?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let path = entry.path();
            if entry
                .file_type()
                .with_context(|| format!("inspecting {}", path.display()))?
                .is_dir()
            {
                self.input_dir(&path)?;
            } else {
                self.input_file(&path)?;
            }
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Record a volume output: sidecar plus payload.
    pub fn output_volume(&mut self, path: &Path) {
        let sidecar = sidecar_path(path);
        let stem = sidecar
            .to_string_lossy()
            .trim_end_matches(".vol.json")
            .to_string();
        self.output(&sidecar);
        self.output(Path::new(&format!("{stem}.raw")));
    }

    pub fn finish(self, error: Option<String>) -> RunManifest {
        RunManifest {
            command: self.command,
            parameters: self.parameters,
            inputs: self.inputs,
            outputs: self.outputs,
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_seconds: self.started.elapsed().as_secs_f64(),
            error,
        }
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Write the manifest, creating parent directories as needed.
pub fn write_manifest(manifest: &RunManifest, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let text = serde_json::to_string_pretty(manifest).expect("manifest serialization cannot fail");
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
