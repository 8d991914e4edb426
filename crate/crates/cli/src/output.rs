//! CSV tables, checksums and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliResult;

/// Shortest round-trip decimal; exponent notation outside `[1e-4, 1e15)`.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// A column-named table. Headers carry units in brackets, e.g. `theta [$]`.
#[derive(Debug, Clone, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&x| fmt_num(x)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn to_bytes(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub seed: u64,
    pub config: &'a ExperimentConfig,
    pub files: Vec<FileEntry>,
}

/// Output directory that remembers the checksum of everything written to it.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(FileEntry {
            name: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        log::info!("wrote {}", self.dir.join(name).display());
        Ok(())
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> CliResult<()> {
        let bytes = table.to_bytes()?;
        self.write_bytes(name, &bytes)
    }

    pub fn finish(mut self, command: &str, config: &ExperimentConfig) -> CliResult<PathBuf> {
        self.files.sort_by(|a, b| a.name.cmp(&b.name));
        let manifest = RunManifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: config.seed,
            config,
            files: self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// Label used in file names, e.g. `0.1` or `-0.5`.
pub fn label(x: f64) -> String {
    format!("{x}")
}
