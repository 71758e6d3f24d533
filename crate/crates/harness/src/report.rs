//! Run summaries, manifests and the files that carry them.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Version stamped into summaries and manifests.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Format tag of `summary.json` and `manifest.json`.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    /// Value the measurement is compared with, when there is one.
    pub target: Option<f64>,
    /// Allowed absolute deviation from `target`.
    pub tolerance: Option<f64>,
    pub detail: Option<String>,
}

impl Assertion {
    /// Passes when `|measured - target| <= tolerance`.
    pub fn within(name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: (measured - target).abs() <= tolerance,
            measured,
            target: Some(target),
            tolerance: Some(tolerance),
            detail: None,
        }
    }

    pub fn check(name: impl Into<String>, passed: bool, measured: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            measured,
            target: None,
            tolerance: None,
            detail: Some(detail.into()),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format_version: u32,
    pub artifact_version: String,
    pub kind: String,
    pub seed: u64,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
    pub values: BTreeMap<String, serde_json::Value>,
    pub warnings: Vec<String>,
}

impl Summary {
    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub artifact_version: String,
    pub kind: String,
    pub seed: u64,
    /// sha256 of the canonical effective config.
    pub config_digest: String,
    pub config: serde_json::Value,
    pub started_at: String,
    pub finished_at: String,
    /// sha256 of every other file written by the run.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Sorted-key compact JSON, so the digest ignores key order in the source.
pub fn canonical_json(value: &serde_json::Value) -> String {
    fn sort(v: &serde_json::Value) -> serde_json::Value {
        match v {
            serde_json::Value::Object(m) => {
                let sorted: BTreeMap<&String, serde_json::Value> = m.iter().map(|(k, v)| (k, sort(v))).collect();
                serde_json::Value::Object(sorted.into_iter().map(|(k, v)| (k.clone(), v)).collect())
            }
            serde_json::Value::Array(a) => serde_json::Value::Array(a.iter().map(sort).collect()),
            other => other.clone(),
        }
    }
    sort(value).to_string()
}

pub fn config_digest(config: &serde_json::Value) -> String {
    sha256_hex(canonical_json(config).as_bytes())
}

/// Writes `files` in order and returns their checksums.
pub fn write_files(dir: &Path, files: &[(String, Vec<u8>)]) -> io::Result<BTreeMap<String, String>> {
    fs::create_dir_all(dir)?;
    let mut sums = BTreeMap::new();
    for (name, bytes) in files {
        fs::write(dir.join(name), bytes)?;
        sums.insert(name.clone(), sha256_hex(bytes));
    }
    Ok(sums)
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("plain data serializes");
    bytes.push(b'\n');
    bytes
}
