//! Output directories and hashed CSV files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::OUTPUT_DIR_ENV;
use crate::error::CliResult;

/// `explicit`, else `$SUSBAYES_OUTPUT_DIR/<name>`, else `./susbayes-output/<name>`.
pub fn output_dir(explicit: Option<&Path>, name: &str) -> CliResult<PathBuf> {
    let dir = match explicit {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUTPUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("susbayes-output"))
            .join(name),
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// A written file as recorded in a manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub rows: usize,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Rows of a CSV file accumulated in memory, then written and hashed.
pub struct CsvTable {
    writer: csv::Writer<Vec<u8>>,
    rows: usize,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> CliResult<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header.iter().map(AsRef::as_ref))?;
        Ok(Self { writer, rows: 0 })
    }

    pub fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        self.rows += 1;
        Ok(())
    }

    pub fn save(self, dir: &Path, name: &str) -> CliResult<FileRecord> {
        let rows = self.rows;
        let bytes = self.writer.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        std::fs::write(dir.join(name), &bytes)?;
        Ok(FileRecord { name: name.to_owned(), rows, sha256: sha256_hex(&bytes) })
    }
}

/// Shortest round-trip representation; empty for missing values.
pub fn num(x: f64) -> String {
    if x.is_nan() { String::new() } else { x.to_string() }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
