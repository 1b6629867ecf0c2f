//! Run manifests: one JSON document per command invocation.
//!
//! The document is hashed with its wall-clock timestamp removed, so identical
//! commands with identical seeds produce identical `determinism_hash` values
//! and, apart from `generated_unix_ms`, identical bytes.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliResult;
use crate::output::{sha256_hex, FileRecord};

pub const SCHEMA_VERSION: &str = "susbayes-manifest/1";
pub const MANIFEST_FILE: &str = "manifest.json";

pub struct Manifest {
    body: serde_json::Map<String, Value>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut body = serde_json::Map::new();
        body.insert("schema_version".into(), json!(SCHEMA_VERSION));
        body.insert("command".into(), json!(command));
        body.insert("package_version".into(), json!(env!("CARGO_PKG_VERSION")));
        Self { body }
    }

    pub fn set<T: Serialize>(&mut self, key: &str, value: T) -> CliResult<()> {
        self.body.insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn files(&mut self, files: &[FileRecord]) -> CliResult<()> {
        self.set("files", files)
    }

    /// Hash of the document without timestamp and hash fields.
    pub fn determinism_hash(&self) -> CliResult<String> {
        Ok(sha256_hex(&serde_json::to_vec(&self.body)?))
    }

    pub fn write(mut self, dir: &Path) -> CliResult<Value> {
        let hash = self.determinism_hash()?;
        let ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0);
        self.body.insert("determinism_hash".into(), json!(hash));
        self.body.insert("generated_unix_ms".into(), json!(ms));
        let doc = Value::Object(self.body);
        let mut bytes = serde_json::to_vec_pretty(&doc)?;
        bytes.push(b'\n');
        std::fs::write(dir.join(MANIFEST_FILE), bytes)?;
        Ok(doc)
    }
}
