//! Run manifests: what was run, with which effective configuration, and
//! the hashes of everything read and written.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use smdma::{Error, Result};

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug)]
pub struct Manifest {
    command: String,
    argv: Vec<String>,
    config: Option<String>,
    seeds: Map<String, Value>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: u64,
}

impl Manifest {
    pub fn begin(command: &str, argv: &[String]) -> Self {
        Manifest {
            command: command.to_string(),
            argv: argv.to_vec(),
            config: None,
            seeds: Map::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: now_unix(),
        }
    }

    pub fn config(&mut self, text: String) {
        self.config = Some(text);
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), json!(value));
    }

    pub fn inputs<I: IntoIterator<Item = PathBuf>>(&mut self, paths: I) {
        self.inputs.extend(paths);
    }

    pub fn output(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    pub fn outputs<I: IntoIterator<Item = PathBuf>>(&mut self, paths: I) {
        self.outputs.extend(paths);
    }

    fn hashes(paths: &[PathBuf]) -> Result<Map<String, Value>> {
        let mut m = Map::new();
        for p in paths {
            m.insert(p.display().to_string(), json!(sha256_file(p)?));
        }
        Ok(m)
    }

    /// Hashes inputs and outputs and writes the manifest to `path`.
    pub fn finish(self, path: &Path) -> Result<()> {
        let cwd = std::env::current_dir().map_err(|e| Error::io(".", e))?;
        let doc = json!({
            "tool": "smdma",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "argv": self.argv,
            "cwd": cwd.display().to_string(),
            "config": self.config,
            "seeds": self.seeds,
            "inputs": Self::hashes(&self.inputs)?,
            "outputs": Self::hashes(&self.outputs)?,
            "started_unix": self.started,
            "finished_unix": now_unix(),
        });
        let text = serde_json::to_string_pretty(&doc).expect("manifest serializes") + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// A manifest read back for replay.
#[derive(Debug)]
pub struct RecordedRun {
    pub argv: Vec<String>,
    pub cwd: PathBuf,
    pub config: Option<String>,
    pub outputs: Vec<(PathBuf, String)>,
}

pub fn read_manifest(path: &Path) -> Result<RecordedRun> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("{}: invalid manifest JSON: {e}", path.display())))?;
    let bad = |what: &str| Error::Data(format!("{}: manifest field {what} missing or malformed", path.display()));
    let argv = doc["argv"]
        .as_array()
        .ok_or_else(|| bad("argv"))?
        .iter()
        .map(|v| v.as_str().map(String::from).ok_or_else(|| bad("argv")))
        .collect::<Result<Vec<_>>>()?;
    let cwd = PathBuf::from(doc["cwd"].as_str().ok_or_else(|| bad("cwd"))?);
    let config = doc["config"].as_str().map(String::from);
    let outputs = doc["outputs"]
        .as_object()
        .ok_or_else(|| bad("outputs"))?
        .iter()
        .map(|(k, v)| Ok((PathBuf::from(k), v.as_str().ok_or_else(|| bad("outputs"))?.to_string())))
        .collect::<Result<Vec<_>>>()?;
    Ok(RecordedRun { argv, cwd, config, outputs })
}
