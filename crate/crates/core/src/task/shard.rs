//! On-disk task shards.
//!
//! A shard is a directory holding `manifest.json` plus four raw payload
//! files with every task's rows concatenated in manifest order:
//!
//! | file           | contents                                   |
//! |----------------|--------------------------------------------|
//! | `support_x.f32` | little-endian `f32`, row-major             |
//! | `query_x.f32`   | little-endian `f32`, row-major             |
//! | `support_y.i8`  | one signed byte per support row, `{-1,0,1}` |
//! | `query_y.i8`    | one signed byte per query row, `{0,1}`      |
//!
//! The manifest records per-task shapes and metadata and the SHA-256 of each
//! payload file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{QueryKind, Regime, Task, TaskMeta};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const SHARD_FORMAT: &str = "incontext-ad/task-shard";
pub const SHARD_VERSION: u32 = 1;

const PAYLOADS: [&str; 4] = ["support_x.f32", "query_x.f32", "support_y.i8", "query_y.i8"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskEntry {
    pub index: u64,
    pub seed: u64,
    pub regime: Regime,
    pub d_in: usize,
    pub n_support: usize,
    pub n_query: usize,
    pub rho: f64,
    pub rho_sup: f64,
    pub n_anomalies: usize,
    pub n_labeled: usize,
    /// One character per query row: `n`ormal, `s`tructural, `p`erturbed.
    pub query_kinds: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShardManifest {
    pub format: String,
    pub version: u32,
    pub n_tasks: usize,
    pub regime_counts: BTreeMap<Regime, usize>,
    pub files: BTreeMap<String, FileDigest>,
    pub tasks: Vec<TaskEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `tasks` as one shard directory, creating it if needed.
pub fn write_shard(dir: &Path, tasks: &[Task]) -> Result<ShardManifest> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let mut payload: [Vec<u8>; 4] = Default::default();
    let mut regime_counts: BTreeMap<Regime, usize> = Regime::ALL.iter().map(|&r| (r, 0)).collect();
    let mut entries = Vec::with_capacity(tasks.len());
    for t in tasks {
        for &v in t.support_x.as_slice() {
            payload[0].extend_from_slice(&v.to_le_bytes());
        }
        for &v in t.query_x.as_slice() {
            payload[1].extend_from_slice(&v.to_le_bytes());
        }
        payload[2].extend(t.support_y.iter().map(|&y| y as u8));
        payload[3].extend(t.query_y.iter().map(|&y| y as u8));
        *regime_counts.entry(t.regime).or_default() += 1;
        entries.push(TaskEntry {
            index: t.meta.index,
            seed: t.meta.seed,
            regime: t.regime,
            d_in: t.meta.d_in,
            n_support: t.n_support(),
            n_query: t.n_query(),
            rho: t.meta.rho,
            rho_sup: t.meta.rho_sup,
            n_anomalies: t.meta.n_anomalies,
            n_labeled: t.meta.n_labeled,
            query_kinds: t.meta.query_kinds.iter().map(|k| k.code()).collect(),
        });
    }
    let mut files = BTreeMap::new();
    for (name, bytes) in PAYLOADS.iter().zip(&payload) {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(Error::io(&path))?;
        files.insert(name.to_string(), FileDigest { bytes: bytes.len() as u64, sha256: sha256_hex(bytes) });
    }
    let manifest = ShardManifest {
        format: SHARD_FORMAT.into(),
        version: SHARD_VERSION,
        n_tasks: tasks.len(),
        regime_counts,
        files,
        tasks: entries,
    };
    let path = dir.join("manifest.json");
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    fs::write(&path, json).map_err(Error::io(&path))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<ShardManifest> {
    let path = dir.join("manifest.json");
    let bytes = fs::read(&path).map_err(Error::io(&path))?;
    let manifest: ShardManifest = serde_json::from_slice(&bytes)?;
    if manifest.format != SHARD_FORMAT {
        return Err(Error::Malformed { path, reason: format!("unexpected format tag '{}'", manifest.format) });
    }
    if manifest.version != SHARD_VERSION {
        return Err(Error::VersionMismatch { found: manifest.version, expected: SHARD_VERSION });
    }
    Ok(manifest)
}

/// Reads and verifies every task of a shard.
pub fn read_shard(dir: &Path) -> Result<Vec<Task>> {
    let manifest = read_manifest(dir)?;
    let mut payload: Vec<Vec<u8>> = Vec::with_capacity(4);
    for name in PAYLOADS {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(Error::io(&path))?;
        let digest = manifest
            .files
            .get(name)
            .ok_or_else(|| Error::Malformed { path: path.clone(), reason: "missing from manifest".into() })?;
        if digest.bytes != bytes.len() as u64 || digest.sha256 != sha256_hex(&bytes) {
            return Err(Error::ChecksumMismatch { path });
        }
        payload.push(bytes);
    }
    let malformed = |reason: &str| Error::Malformed { path: dir.to_path_buf(), reason: reason.into() };
    let mut cursor = [0usize; 4];
    let mut tasks = Vec::with_capacity(manifest.n_tasks);
    for e in &manifest.tasks {
        let take = |slot: usize, n: usize, cursor: &mut [usize; 4]| -> Result<&[u8]> {
            let start = cursor[slot];
            let end = start + n;
            let bytes = payload[slot].get(start..end).ok_or_else(|| malformed("payload shorter than manifest"))?;
            cursor[slot] = end;
            Ok(bytes)
        };
        let sx = f32s(take(0, 4 * e.n_support * e.d_in, &mut cursor)?);
        let qx = f32s(take(1, 4 * e.n_query * e.d_in, &mut cursor)?);
        let sy: Vec<i8> = take(2, e.n_support, &mut cursor)?.iter().map(|&b| b as i8).collect();
        let qy: Vec<i8> = take(3, e.n_query, &mut cursor)?.iter().map(|&b| b as i8).collect();
        let query_kinds = e
            .query_kinds
            .chars()
            .map(QueryKind::from_code)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| malformed("unknown query kind code"))?;
        tasks.push(Task {
            support_x: Matrix::from_vec(e.n_support, e.d_in, sx),
            support_y: sy,
            query_x: Matrix::from_vec(e.n_query, e.d_in, qx),
            query_y: qy,
            regime: e.regime,
            meta: TaskMeta {
                rho: e.rho,
                rho_sup: e.rho_sup,
                n_anomalies: e.n_anomalies,
                n_labeled: e.n_labeled,
                d_in: e.d_in,
                seed: e.seed,
                index: e.index,
                query_kinds,
            },
        });
    }
    if tasks.len() != manifest.n_tasks || cursor.iter().zip(&payload).any(|(&c, p)| c != p.len()) {
        return Err(malformed("manifest and payload sizes disagree"));
    }
    Ok(tasks)
}

fn f32s(bytes: &[u8]) -> Vec<f32> {
    bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect()
}

/// Writes a single task as a one-task shard at `dir`.
pub fn serialize_task(task: &Task, dir: &Path) -> Result<()> {
    write_shard(dir, std::slice::from_ref(task)).map(|_| ())
}

pub fn deserialize_task(dir: &Path) -> Result<Task> {
    let mut tasks = read_shard(dir)?;
    if tasks.len() != 1 {
        return Err(Error::Malformed {
            path: dir.to_path_buf(),
            reason: format!("expected one task, found {}", tasks.len()),
        });
    }
    Ok(tasks.remove(0))
}
