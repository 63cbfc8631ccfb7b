use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub versions: BTreeMap<String, String>,
    pub threads: usize,
    pub elapsed_s: f64,
}

pub struct Recorder {
    subcommand: &'static str,
    started: Instant,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl Recorder {
    pub fn start(subcommand: &'static str) -> Self {
        Recorder {
            subcommand,
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, p: impl AsRef<Path>) {
        self.inputs.push(p.as_ref().display().to_string());
    }

    pub fn output(&mut self, p: impl AsRef<Path>) {
        self.outputs.push(p.as_ref().display().to_string());
    }

    /// Write `manifest-<subcommand>.json` into `dir`.
    pub fn finish(mut self, dir: &Path, config: &impl Serialize, threads: usize) -> anyhow::Result<PathBuf> {
        let path = dir.join(format!("manifest-{}.json", self.subcommand));
        self.output(&path);
        let versions = BTreeMap::from([
            ("hahnfit".to_string(), hahnfit::VERSION.to_string()),
            ("hahnfit-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ]);
        let m = RunManifest {
            subcommand: self.subcommand.to_string(),
            args: std::env::args().collect(),
            config: serde_json::to_value(config)?,
            inputs: self.inputs,
            outputs: self.outputs,
            versions,
            threads,
            elapsed_s: self.started.elapsed().as_secs_f64(),
        };
        std::fs::write(&path, serde_json::to_string_pretty(&m)?)?;
        Ok(path)
    }
}
