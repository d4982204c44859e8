//! Run records, pass/fail checks and the output directory manifest.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use epigraph_lab::io::{self, CsvTable};

use crate::error::CliError;

pub const RUN_RECORD: &str = "run.json";
pub const SUMMARY: &str = "summary.json";

/// One asserted property with its observation and acceptance rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub observed: String,
    pub expected: String,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        passed: bool,
        observed: impl Display,
        expected: impl Display,
    ) -> Self {
        Check {
            name: name.into(),
            passed,
            observed: observed.to_string(),
            expected: expected.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Passed,
    Failed,
    NumericalFailure,
    Invalid,
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Passed => 0,
            Status::Failed => 1,
            Status::Invalid => 2,
            Status::NumericalFailure => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub config_hash: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub status: Status,
    pub exit_code: i32,
    pub checks: Vec<Check>,
    pub error: Option<String>,
    pub manifest: Vec<ManifestEntry>,
}

impl RunRecord {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(RUN_RECORD);
        let text = fs::read_to_string(&path)
            .map_err(|_| CliError::validation(format!("{}: no run record found", dir.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }

    /// Manifest files that are missing, empty or altered.
    pub fn manifest_problems(&self, dir: &Path) -> Vec<String> {
        self.manifest
            .iter()
            .filter_map(|m| match fs::read(dir.join(&m.file)) {
                Err(_) => Some(format!("{}: missing", m.file)),
                Ok(b) if b.is_empty() => Some(format!("{}: empty", m.file)),
                Ok(b) if hex::encode(Sha256::digest(&b)) != m.sha256 => {
                    Some(format!("{}: checksum mismatch", m.file))
                }
                Ok(_) => None,
            })
            .collect()
    }
}

pub fn now_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Output directory that records every file it writes.
#[derive(Debug)]
pub struct OutputDir {
    path: PathBuf,
    manifest: Vec<ManifestEntry>,
}

impl OutputDir {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(OutputDir {
            path: path.to_path_buf(),
            manifest: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn manifest(&self) -> &[ManifestEntry] {
        &self.manifest
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        io::write_atomic(&self.path.join(name), bytes)
            .map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        self.manifest.retain(|m| m.file != name);
        self.manifest.push(ManifestEntry {
            file: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, table: &CsvTable) -> Result<(), CliError> {
        let bytes = table
            .to_bytes()
            .map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        self.write_bytes(name, &bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let doc = io::with_schema(value).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        let mut bytes = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }
}
