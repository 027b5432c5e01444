//! Output files: atomic writes, hashes, batch CSVs and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::measurement::{MeasurementSetting, SampleBatch};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const BATCH_DIR: &str = "batches";

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Six significant digits: fixed notation for moderate magnitudes,
/// scientific otherwise.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        format!("{:.*}", (5 - exp) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

/// Simple CSV table with `#` comment lines on top.
pub struct CsvTable {
    comments: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(comments: Vec<String>, header: &[&str]) -> Self {
        Self {
            comments,
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render().as_bytes())
    }
}

/// Batch file: `#` header lines carrying the config hash and the serialized
/// setting, then one outcome per line at full precision.
pub fn render_batch(batch: &SampleBatch, config_hash: &str) -> Result<String> {
    let mut out = String::with_capacity(batch.len() * 22 + 256);
    let _ = writeln!(out, "# homodyne sample batch");
    let _ = writeln!(out, "# config_hash = {config_hash}");
    let _ = writeln!(out, "# setting = {}", serde_json::to_string(&batch.setting)?);
    let _ = writeln!(out, "# chunk_shots = {}", batch.chunk_shots);
    for x in &batch.outcomes {
        let _ = writeln!(out, "{x}");
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchFile {
    pub config_hash: String,
    pub batch: SampleBatch,
}

pub fn parse_batch(text: &str, path: &Path) -> Result<BatchFile> {
    let malformed = |reason: String| Error::Malformed {
        path: path.to_path_buf(),
        reason,
    };
    let mut hash = None;
    let mut setting: Option<MeasurementSetting> = None;
    let mut chunk_shots = None;
    let mut outcomes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("config_hash = ") {
                hash = Some(v.to_string());
            } else if let Some(v) = comment.strip_prefix("setting = ") {
                setting = Some(serde_json::from_str(v).map_err(|e| malformed(e.to_string()))?);
            } else if let Some(v) = comment.strip_prefix("chunk_shots = ") {
                chunk_shots = Some(v.parse().map_err(|_| malformed(format!("bad chunk_shots {v:?}")))?);
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        outcomes.push(
            line.trim()
                .parse::<f64>()
                .map_err(|_| malformed(format!("line {}: not a number", i + 1)))?,
        );
    }
    let setting = setting.ok_or_else(|| malformed("missing setting header".into()))?;
    if outcomes.len() != setting.shots {
        return Err(malformed(format!(
            "{} outcomes for {} shots",
            outcomes.len(),
            setting.shots
        )));
    }
    Ok(BatchFile {
        config_hash: hash.ok_or_else(|| malformed("missing config_hash header".into()))?,
        batch: SampleBatch {
            setting,
            chunk_shots: chunk_shots.ok_or_else(|| malformed("missing chunk_shots header".into()))?,
            outcomes,
        },
    })
}

pub fn read_batch(path: &Path) -> Result<BatchFile> {
    parse_batch(&fs::read_to_string(path)?, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the run directory.
    pub path: String,
    pub kind: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub sampling: u64,
    pub bootstrap: u64,
    pub resamples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub seeds: Seeds,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    /// Accepts either a manifest file or the run directory holding one.
    pub fn locate(path: &Path) -> PathBuf {
        if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        }
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let file = Self::locate(path);
        let manifest: Self = read_json(&file)?;
        let dir = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, dir))
    }

    /// Checks that every listed file exists with the recorded hash.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for entry in &self.files {
            let path = dir.join(&entry.path);
            let found = sha256_hex(&fs::read(&path)?);
            if found != entry.sha256 {
                return Err(Error::HashMismatch {
                    path,
                    expected: entry.sha256.clone(),
                    found,
                });
            }
        }
        Ok(())
    }

    pub fn files_of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a ManifestEntry> + 'a {
        self.files.iter().filter(move |e| e.kind == kind)
    }
}

/// Collects the files of a run as they are written.
#[derive(Debug, Default)]
pub struct FileLog {
    entries: Vec<ManifestEntry>,
}

impl FileLog {
    pub fn record(&mut self, dir: &Path, relative: &str, kind: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&dir.join(relative), bytes)?;
        self.entries.push(ManifestEntry {
            path: relative.to_string(),
            kind: kind.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn record_json<T: Serialize>(&mut self, dir: &Path, relative: &str, kind: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.record(dir, relative, kind, text.as_bytes())
    }

    pub fn push(&mut self, entry: ManifestEntry) {
        self.entries.push(entry);
    }

    pub fn into_entries(self) -> Vec<ManifestEntry> {
        self.entries
    }
}
