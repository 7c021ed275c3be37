//! Artifact writers: CSV tables, the run manifest, and the config hash.
//! Float formatting is pinned so identical runs produce identical bytes.

use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Fixed float rendering for all CSV output.
pub fn fmt_f(v: f64) -> String {
    format!("{v:.12e}")
}

pub fn config_hash(canonical: &str, seed: u64, version: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    hasher.update(seed.to_le_bytes());
    hasher.update(version.as_bytes());
    hex::encode(&hasher.finalize()[..6])
}

/// A CSV file accumulated in memory and flushed once.
pub struct Csv {
    name: String,
    buf: String,
}

impl Csv {
    pub fn new(name: &str, header: &str) -> Csv {
        Csv { name: name.to_string(), buf: format!("{header}\n") }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        fs::write(dir.join(&self.name), self.buf.as_bytes())
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// Key = value manifest; every artifact file is listed under `files`.
pub struct Manifest {
    entries: Vec<(String, String)>,
    files: Vec<String>,
}

impl Manifest {
    pub fn new(hash: &str, experiment: &str, seed: u64, version: &str) -> Manifest {
        let mut m = Manifest { entries: Vec::new(), files: Vec::new() };
        m.set("config_hash", hash);
        m.set("version", version);
        m.set("experiment", experiment);
        m.set("seed", &seed.to_string());
        m
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn set_f(&mut self, key: &str, value: f64) {
        self.set(key, &fmt_f(value));
    }

    pub fn add_file(&mut self, name: &str) {
        self.files.push(name.to_string());
    }

    pub fn write_to(&self, dir: &Path, wall_ms: u128) -> std::io::Result<()> {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out.push_str(&format!("files = {}\n", self.files.join(";")));
        out.push_str(&format!("wall_ms = {wall_ms}\n"));
        let mut f = fs::File::create(dir.join("manifest.txt"))?;
        f.write_all(out.as_bytes())
    }
}

/// Reads a manifest back as key/value pairs.
pub fn read_manifest(path: &Path) -> std::io::Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

pub fn run_dir(out: &Path, experiment: &str, hash: &str) -> PathBuf {
    out.join(format!("{experiment}-{hash}"))
}
