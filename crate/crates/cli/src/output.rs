//! Buffered outputs, written together with their manifest only once a run
//! has succeeded.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Bumped whenever a serialized field changes meaning or disappears.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

#[derive(Serialize)]
struct FileEntry<'a> {
    name: &'a str,
    sha256: String,
    bytes: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    schema_version: u32,
    subcommand: &'a str,
    config_sha256: String,
    seed: u64,
    files: Vec<FileEntry<'a>>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Outputs {
    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| CliError::Failed(e.to_string());
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(r).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Failed(e.to_string()))?;
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    /// Writes every file and the manifest; removes what was written if any
    /// write fails.
    pub fn commit(&self, dir: &Path, subcommand: &str, config: &str, seed: u64) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)?;
        let manifest = Manifest {
            tool: "latwalk",
            version: env!("CARGO_PKG_VERSION"),
            schema_version: SCHEMA_VERSION,
            subcommand,
            config_sha256: sha256_hex(config.as_bytes()),
            seed,
            files: self
                .files
                .iter()
                .map(|(name, b)| FileEntry {
                    name,
                    sha256: sha256_hex(b),
                    bytes: b.len(),
                })
                .collect(),
        };
        let mut m = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Failed(e.to_string()))?;
        m.push(b'\n');
        let mut written = Vec::new();
        let all = self.files.iter().map(|(n, b)| (n.as_str(), b)).chain([("manifest.json", &m)]);
        for (name, bytes) in all {
            let path = dir.join(name);
            if let Err(e) = std::fs::write(&path, bytes) {
                for p in &written {
                    let _ = std::fs::remove_file(p);
                }
                let _ = std::fs::remove_file(&path);
                return Err(e.into());
            }
            written.push(path);
        }
        Ok(())
    }
}
