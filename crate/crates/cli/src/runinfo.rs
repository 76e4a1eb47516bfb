//! Per-run provenance: every command writes a `run_manifest.json` capturing
//! the resolved configuration, tool version, and digests of its input files.
//! The manifest carries no timestamps, so identical runs produce identical
//! bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub input_digests: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).with_context(|| format!("digesting {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

pub struct RunRecorder {
    command: String,
    config: serde_json::Value,
    inputs: BTreeMap<String, String>,
    outputs: Vec<PathBuf>,
}

impl RunRecorder {
    pub fn new(command: &str, config: impl Serialize) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            config: serde_json::to_value(config).context("serializing resolved config")?,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        })
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Writes `run_manifest.json` into `out_dir` and prints the outputs.
    pub fn finish(self, out_dir: &Path) -> Result<()> {
        let manifest = RunManifest {
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.config,
            input_digests: self.inputs,
            outputs: self
                .outputs
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
        };
        let path = out_dir.join("run_manifest.json");
        let json = serde_json::to_string_pretty(&manifest).context("serializing run manifest")?;
        std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
        for output in &self.outputs {
            println!("{}", output.display());
        }
        Ok(())
    }
}
