//! Run manifests: every artifact-producing command records its resolved
//! configuration, seeds, input/output digests, and wall-clock time next to
//! its outputs.

use crate::error::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// Resolved configuration after CLI/config-file/default precedence.
    pub config: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub wall_clock_secs: f64,
}

pub fn sha256_file<P: AsRef<Path>>(path: P) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let hash = Sha256::digest(&bytes);
    Ok(hash.iter().map(|b| format!("{b:02x}")).collect())
}

/// Collects manifest fields over the lifetime of a command.
pub struct ManifestBuilder {
    command: String,
    config: BTreeMap<String, String>,
    seeds: BTreeMap<String, u64>,
    inputs: BTreeMap<String, String>,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            config: BTreeMap::new(),
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.insert(key.to_string(), value.to_string());
        self
    }

    pub fn seed(&mut self, key: &str, value: u64) -> &mut Self {
        self.seeds.insert(key.to_string(), value);
        self
    }

    pub fn input<P: AsRef<Path>>(&mut self, path: P) -> Result<&mut Self> {
        let path = path.as_ref();
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(self)
    }

    pub fn output<P: AsRef<Path>>(&mut self, path: P) -> &mut Self {
        self.outputs.push(path.as_ref().to_path_buf());
        self
    }

    /// Digest outputs and write the manifest JSON.
    pub fn write<P: AsRef<Path>>(self, manifest_path: P) -> Result<()> {
        let mut outputs = BTreeMap::new();
        for path in &self.outputs {
            outputs.insert(path.display().to_string(), sha256_file(path)?);
        }
        let manifest = RunManifest {
            tool: "ravenkit",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config: self.config,
            seeds: self.seeds,
            inputs: self.inputs,
            outputs,
            wall_clock_secs: self.started.elapsed().as_secs_f64(),
        };
        std::fs::write(manifest_path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_digests_inputs_and_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        let output = dir.path().join("out.txt");
        std::fs::write(&input, "hello").unwrap();
        std::fs::write(&output, "world").unwrap();
        let mut builder = ManifestBuilder::new("test");
        builder.config("count", 3).seed("seed", 42);
        builder.input(&input).unwrap();
        builder.output(&output);
        let manifest_path = dir.path().join("manifest.json");
        builder.write(&manifest_path).unwrap();
        let text = std::fs::read_to_string(&manifest_path).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["command"], "test");
        assert_eq!(parsed["seeds"]["seed"], 42);
        // sha256("hello")
        assert!(text.contains("2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"));
    }
}
