use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// In-memory CSV table; written with ',' separators, '.' decimals and LF endings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Parses CSV text produced elsewhere in the crate.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let parse = |e: csv::Error| Error::Parse {
            what: "CSV table".into(),
            message: e.to_string(),
        };
        let header = rdr
            .headers()
            .map_err(parse)?
            .iter()
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec.map_err(parse)?.iter().map(String::from).collect());
        }
        Ok(Self { header, rows })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        // Writing to a Vec cannot fail.
        w.write_record(&self.header).unwrap();
        for r in &self.rows {
            w.write_record(r).unwrap();
        }
        w.into_inner().unwrap()
    }
}

pub use crate::units::num;

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmittedFile {
    pub path: String,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub command: String,
    pub scenario_sha256: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub wall_clock_s: f64,
    pub files: Vec<EmittedFile>,
    pub failed_points: Vec<usize>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes `table` to `dir/name`, returning the manifest entry relative to `root`.
pub fn write_table(root: &Path, rel: &Path, table: &CsvTable) -> Result<EmittedFile> {
    let path: PathBuf = root.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let bytes = table.to_bytes();
    fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
    Ok(EmittedFile {
        path: rel.to_string_lossy().replace('\\', "/"),
        rows: table.rows.len(),
        sha256: sha256_hex(&bytes),
    })
}

pub fn write_manifest(root: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    let path = root.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Numerical(format!("manifest serialization: {e}")))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dialect() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push(vec![num(0.5), "x,y".into()]);
        assert_eq!(t.to_bytes(), b"a,b\n0.5,\"x,y\"\n");
        assert_eq!(CsvTable::from_text("a,b\n0.5,\"x,y\"\n").unwrap(), t);
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(2.5e-69), "2.5e-69");
        assert_eq!(num(7e13), "70000000000000");
        assert_eq!(num(1e15), "1e15");
    }
}
