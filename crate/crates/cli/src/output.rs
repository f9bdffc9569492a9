//! Output directory bookkeeping and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Files written by one command. Unless [`Outputs::finish`] runs, every
/// recorded file is deleted when this is dropped, so a failed command
/// leaves no partial results behind.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
    started: f64,
    done: bool,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub tool_version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    /// Path relative to the output directory -> `sha256:<hex>`.
    pub outputs: BTreeMap<String, String>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            started: now(),
            done: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        self.written.push(path.clone());
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Registers a file some other routine wrote into the directory.
    pub fn record(&mut self, path: PathBuf) {
        self.written.push(path);
    }

    /// Writes `manifest.json` listing a digest for every output.
    pub fn finish<C: Serialize>(mut self, command: &str, config: &C, seed: u64) -> Result<PathBuf> {
        let mut outputs = BTreeMap::new();
        for path in &self.written {
            let bytes = fs::read(path).with_context(|| format!("reading back {}", path.display()))?;
            let rel = path.strip_prefix(&self.dir).unwrap_or(path);
            let key = rel.to_string_lossy().replace('\\', "/");
            outputs.insert(key, format!("sha256:{}", sha256_hex(&bytes)));
        }
        let manifest = RunManifest {
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: self.started,
            finished_unix: now(),
            outputs,
        };
        // Value maps are ordered, so the keys come out sorted.
        let text = serde_json::to_string_pretty(&serde_json::to_value(&manifest)?)? + "\n";
        let path = self.dir.join(MANIFEST_NAME);
        fs::write(&path, text)?;
        self.done = true;
        Ok(path)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.done {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}

/// Serializes `rows` to CSV bytes with a header row.
pub fn csv_bytes<R: AsRef<[String]>>(header: &[&str], rows: &[R]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.as_ref())?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))
}

/// Fixed-precision float for data files.
pub fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dropped_outputs_are_removed() {
        let dir = tempfile::tempdir().unwrap();
        let path = {
            let mut out = Outputs::new(dir.path()).unwrap();
            out.write("a.csv", b"x\n").unwrap()
        };
        assert!(!path.exists());
    }

    #[test]
    fn manifest_lists_digests_with_sorted_keys() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::new(dir.path()).unwrap();
        out.write("b.csv", b"b\n").unwrap();
        out.write("a.csv", b"").unwrap();
        let path = out.finish("solve", &serde_json::json!({"z": 1, "a": 2}), 7).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert!(dir.path().join("a.csv").exists());
        assert!(text.contains("\"a.csv\": \"sha256:e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855\""));
        assert!(text.find("\"a\"").unwrap() < text.find("\"z\"").unwrap());
        assert!(text.find("\"command\"").unwrap() < text.find("\"config\"").unwrap());
    }

    #[test]
    fn csv_has_header() {
        let rows = vec![vec!["1".to_string(), "x".to_string()]];
        assert_eq!(csv_bytes(&["a", "b"], &rows).unwrap(), b"a,b\n1,x\n");
    }
}
