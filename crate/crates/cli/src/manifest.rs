//! Input resolution and run manifests.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
struct InputEntry {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    argv: &'a [String],
    seed: Option<u64>,
    inputs: Vec<InputEntry>,
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    notes: serde_json::Map<String, Value>,
}

/// Tracks the files a command reads and writes.
pub struct Run {
    command: String,
    argv: Vec<String>,
    data_root: Option<PathBuf>,
    pub seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    notes: serde_json::Map<String, Value>,
}

impl Run {
    pub fn new(command: &str, argv: Vec<String>, data_root: Option<PathBuf>) -> Self {
        Run {
            command: command.to_string(),
            argv,
            data_root,
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: serde_json::Map::new(),
        }
    }

    pub fn data_root(&self) -> Option<&Path> {
        self.data_root.as_deref()
    }

    /// Relative paths missing from the working directory are looked up
    /// under the data root.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() || path.exists() {
            return path.to_path_buf();
        }
        match &self.data_root {
            Some(root) if root.join(path).exists() => root.join(path),
            _ => path.to_path_buf(),
        }
    }

    /// Opens an input and records it in the manifest.
    pub fn open(&mut self, path: &Path) -> Result<(BufReader<File>, String)> {
        let resolved = self.resolve(path);
        let f = File::open(&resolved).with_context(|| format!("cannot open {}", resolved.display()))?;
        self.inputs.push(resolved.clone());
        Ok((BufReader::new(f), resolved.display().to_string()))
    }

    pub fn record_inputs(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        self.inputs.extend(paths);
    }

    pub fn note(&mut self, key: &str, value: Value) {
        self.notes.insert(key.to_string(), value);
    }

    /// Creates an output file, refusing to overwrite any input.
    pub fn create(&mut self, path: &Path) -> Result<BufWriter<File>> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
        }
        if path.exists() {
            let target = fs::canonicalize(path)?;
            for input in &self.inputs {
                if fs::canonicalize(input).is_ok_and(|i| i == target) {
                    bail!("refusing to overwrite input file {}", path.display());
                }
            }
        }
        let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        self.outputs.push(path.to_path_buf());
        Ok(BufWriter::new(f))
    }

    /// Writes the manifest to `path`.
    pub fn finish(mut self, path: &Path) -> Result<()> {
        let mut inputs = Vec::new();
        for p in &self.inputs {
            let bytes = fs::read(p).with_context(|| format!("cannot hash {}", p.display()))?;
            inputs.push(InputEntry {
                path: p.display().to_string(),
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
        let outputs = self.outputs.iter().map(|p| p.display().to_string()).collect();
        let manifest = Manifest {
            tool: "toxspan",
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            argv: &self.argv,
            seed: self.seed,
            inputs,
            outputs,
            notes: std::mem::take(&mut self.notes),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        let mut w = self.create(path)?;
        w.write_all(&bytes)?;
        w.flush()?;
        Ok(())
    }
}

/// `results.csv` -> `results.manifest.json`.
pub fn manifest_path_for(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.manifest.json"))
}
