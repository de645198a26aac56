use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Versions of the algorithms whose output a run depends on. Bump an entry
/// whenever that stage's output can change for identical input.
pub const STAGE_VERSIONS: &[(&str, &str)] = &[
    ("validation", "1"),
    ("geometry", "1"),
    ("duplicate_suppression", "1"),
    ("judge_filter", "1"),
    ("page_dedup", "1"),
    ("ground_truth_cleanup", "1"),
    ("screentag", "1"),
    ("metrics", "1"),
    ("loss", "1"),
    ("synth", "1"),
];

/// Record of one invocation. Everything except `elapsed_ms` is a function of
/// the inputs and flags.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_hash: String,
    pub config: Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub stage_versions: BTreeMap<&'static str, &'static str>,
    pub counts: BTreeMap<String, Value>,
    pub elapsed_ms: u128,
}

pub struct ManifestBuilder {
    command: &'static str,
    config: Value,
    inputs: Vec<String>,
    outputs: Vec<String>,
    stages: &'static [&'static str],
    counts: BTreeMap<String, Value>,
    start: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &'static str, config: &impl Serialize, stages: &'static [&'static str]) -> anyhow::Result<Self> {
        Ok(Self {
            command,
            config: serde_json::to_value(config).context("encoding run config")?,
            inputs: Vec::new(),
            outputs: Vec::new(),
            stages,
            counts: BTreeMap::new(),
            start: Instant::now(),
        })
    }

    pub fn input(&mut self, p: &Path) -> &mut Self {
        self.inputs.push(p.display().to_string());
        self
    }

    pub fn output(&mut self, p: &Path) -> &mut Self {
        self.outputs.push(p.display().to_string());
        self
    }

    pub fn count(&mut self, key: &str, v: impl Serialize) -> &mut Self {
        self.counts.insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }

    pub fn finish(self) -> RunManifest {
        RunManifest {
            tool: "screenparse",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config_hash: config_hash(&self.config),
            config: self.config,
            inputs: self.inputs,
            outputs: self.outputs,
            stage_versions: STAGE_VERSIONS
                .iter()
                .filter(|(name, _)| self.stages.contains(name))
                .copied()
                .collect(),
            counts: self.counts,
            elapsed_ms: self.start.elapsed().as_millis(),
        }
    }
}

/// `sha256:` plus the hex digest of the config's compact JSON. Object keys
/// come out sorted, so the hash ignores field order.
pub fn config_hash(config: &Value) -> String {
    let bytes = serde_json::to_vec(config).expect("values always encode");
    format!("sha256:{}", hex::encode(Sha256::digest(&bytes)))
}

/// Where the manifest goes when `--manifest` is not given.
pub fn default_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn write(manifest: &RunManifest, path: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(manifest)? + "\n";
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing manifest {}", p.display())),
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"a":1,"b":[1,2]}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"b":[1,2],"a":1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert!(config_hash(&a).starts_with("sha256:"));
        assert_eq!(config_hash(&a).len(), 7 + 64);
    }

    #[test]
    fn default_path_appends_suffix() {
        assert_eq!(default_path(Path::new("out/x.jsonl")), PathBuf::from("out/x.jsonl.manifest.json"));
    }
}
