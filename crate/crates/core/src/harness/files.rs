//! Result files. Every file carries a [`Metadata`] block: JSON files as a
//! field, CSV files as a leading `#` comment line.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::snn::checkpoint::write_atomic;
use crate::{Error, Result};

/// Revision stamped into result files; set `SPIKEQ_REVISION` at build time
/// to record a VCS revision.
pub const REVISION: &str = match option_env!("SPIKEQ_REVISION") {
    Some(r) => r,
    None => concat!("v", env!("CARGO_PKG_VERSION")),
};

const CSV_META_PREFIX: &str = "# spikeq ";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub revision: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: ExperimentConfig,
}

impl Metadata {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            revision: REVISION.to_string(),
            seed: cfg.seed,
            config_sha256: cfg.hash(),
            config: cfg.clone(),
        }
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Writes `rows` under a metadata comment line and a header row.
pub fn write_csv<T: Serialize>(path: &Path, meta: Option<&Metadata>, rows: &[T]) -> Result<()> {
    let mut out = Vec::new();
    if let Some(m) = meta {
        out.extend_from_slice(CSV_META_PREFIX.as_bytes());
        out.extend_from_slice(&serde_json::to_vec(m)?);
        out.push(b'\n');
    }
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    let out = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &out)
}

/// Writes string records (the first one being the header) under an optional
/// `#` comment line.
pub fn write_table(path: &Path, comment: Option<&str>, records: &[Vec<String>]) -> Result<()> {
    let mut out = Vec::new();
    if let Some(c) = comment {
        out.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.write_record(r)?;
    }
    let out = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &out)
}

/// Rows and (if present) metadata of a file written by [`write_csv`].
pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<(Option<Metadata>, Vec<T>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let meta = match text.lines().next().and_then(|l| l.strip_prefix(CSV_META_PREFIX)) {
        Some(json) => Some(serde_json::from_str(json)?),
        None => None,
    };
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows = r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok((meta, rows))
}

/// Adds `entry` under `key` in `dir/summary.json`, keeping other entries.
pub fn update_summary(dir: &Path, key: &str, entry: serde_json::Value) -> Result<()> {
    let path = dir.join("summary.json");
    let mut all: BTreeMap<String, serde_json::Value> = if path.exists() {
        read_json(&path)?
    } else {
        BTreeMap::new()
    };
    all.insert(key.to_string(), entry);
    write_json(&path, &all)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
