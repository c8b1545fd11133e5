//! Checkpoint directories: `manifest.json` plus raw little-endian `f32`
//! tensor files.
//!
//! `params.f32` holds every parameter tensor in [`layout`] order. When
//! optimizer state is saved, `optimizer.f32` holds the first-moment tensors
//! followed by the second-moment tensors, in the same order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{layout, ArchConfig, ModelParams};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::task::shard::{sha256_hex, FileDigest};

pub const CHECKPOINT_FORMAT: &str = "incontext-ad/checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

const PARAMS_FILE: &str = "params.f32";
const OPTIMIZER_FILE: &str = "optimizer.f32";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Position of the first element, counted in `f32`s.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub version: u32,
    pub arch: ArchConfig,
    pub step: u64,
    pub seed: u64,
    pub tasks_seen: u64,
    pub wall_ms: u64,
    pub n_params: usize,
    /// Adam step counter when optimizer state is present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer_t: Option<u64>,
    pub tensors: Vec<TensorEntry>,
    pub files: BTreeMap<String, FileDigest>,
    /// Free-form provenance such as the training and task configuration.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub t: u64,
    pub m: Vec<Matrix<f32>>,
    pub v: Vec<Matrix<f32>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub step: u64,
    pub seed: u64,
    pub tasks_seen: u64,
    pub wall_ms: u64,
    pub optimizer: Option<OptimizerState>,
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Checkpoint {
    pub fn fresh(params: ModelParams<f32>, seed: u64) -> Self {
        Self { params, step: 0, seed, tasks_seen: 0, wall_ms: 0, optimizer: None, extra: BTreeMap::new() }
    }
}

fn encode(tensors: &[Matrix<f32>], out: &mut Vec<u8>) {
    for t in tensors {
        for &v in t.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn save(dir: &Path, ckpt: &Checkpoint) -> Result<CheckpointManifest> {
    let arch = &ckpt.params.arch;
    let specs = layout(arch);
    if specs.len() != ckpt.params.tensors.len() {
        return Err(Error::DimensionMismatch("parameter list does not match the architecture".into()));
    }
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let mut tensors = Vec::with_capacity(specs.len());
    let mut offset = 0;
    for (s, t) in specs.iter().zip(&ckpt.params.tensors) {
        if (s.rows, s.cols) != t.shape() {
            return Err(Error::DimensionMismatch(format!("tensor {} has shape {:?}", s.name, t.shape())));
        }
        tensors.push(TensorEntry { name: s.name.clone(), rows: s.rows, cols: s.cols, offset });
        offset += s.rows * s.cols;
    }
    let mut files = BTreeMap::new();
    let mut write = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, &bytes).map_err(Error::io(&path))?;
        files.insert(name.to_string(), FileDigest { bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) });
        Ok(())
    };
    let mut bytes = Vec::with_capacity(offset * 4);
    encode(&ckpt.params.tensors, &mut bytes);
    write(PARAMS_FILE, bytes)?;
    if let Some(opt) = &ckpt.optimizer {
        let mut bytes = Vec::with_capacity(offset * 8);
        encode(&opt.m, &mut bytes);
        encode(&opt.v, &mut bytes);
        if bytes.len() != offset * 8 {
            return Err(Error::DimensionMismatch("optimizer moments do not match the parameters".into()));
        }
        write(OPTIMIZER_FILE, bytes)?;
    } else {
        // Do not leave a stale moment file from an earlier save behind.
        let stale = dir.join(OPTIMIZER_FILE);
        if stale.exists() {
            fs::remove_file(&stale).map_err(Error::io(&stale))?;
        }
    }
    let manifest = CheckpointManifest {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        arch: arch.clone(),
        step: ckpt.step,
        seed: ckpt.seed,
        tasks_seen: ckpt.tasks_seen,
        wall_ms: ckpt.wall_ms,
        n_params: offset,
        optimizer_t: ckpt.optimizer.as_ref().map(|o| o.t),
        tensors,
        files,
        extra: ckpt.extra.clone(),
    };
    let path = dir.join("manifest.json");
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    fs::write(&path, json).map_err(Error::io(&path))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<CheckpointManifest> {
    let path = dir.join("manifest.json");
    let bytes = fs::read(&path).map_err(Error::io(&path))?;
    let m: CheckpointManifest = serde_json::from_slice(&bytes)?;
    if m.format != CHECKPOINT_FORMAT {
        return Err(Error::Malformed { path, reason: format!("unexpected format tag '{}'", m.format) });
    }
    if m.version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch { found: m.version, expected: CHECKPOINT_VERSION });
    }
    Ok(m)
}

fn read_verified(dir: &Path, manifest: &CheckpointManifest, name: &str) -> Result<Vec<f32>> {
    let path = dir.join(name);
    let digest = manifest
        .files
        .get(name)
        .ok_or_else(|| Error::Malformed { path: path.clone(), reason: "missing from manifest".into() })?;
    let bytes = fs::read(&path).map_err(Error::io(&path))?;
    if digest.bytes != bytes.len() as u64 || digest.sha256 != sha256_hex(&bytes) {
        return Err(Error::ChecksumMismatch { path });
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

fn split(flat: &[f32], entries: &[TensorEntry]) -> Vec<Matrix<f32>> {
    entries
        .iter()
        .map(|e| Matrix::from_vec(e.rows, e.cols, flat[e.offset..e.offset + e.rows * e.cols].to_vec()))
        .collect()
}

pub fn load(dir: &Path) -> Result<Checkpoint> {
    let m = read_manifest(dir)?;
    m.arch.validate()?;
    let malformed = |reason: String| Error::Malformed { path: dir.join("manifest.json"), reason };
    let specs = layout(&m.arch);
    if specs.len() != m.tensors.len() {
        return Err(malformed(format!("{} tensors listed, architecture needs {}", m.tensors.len(), specs.len())));
    }
    let mut offset = 0;
    for (s, e) in specs.iter().zip(&m.tensors) {
        if s.name != e.name || s.rows != e.rows || s.cols != e.cols || e.offset != offset {
            return Err(malformed(format!("tensor entry '{}' does not match the architecture", e.name)));
        }
        offset += e.rows * e.cols;
    }
    let flat = read_verified(dir, &m, PARAMS_FILE)?;
    if flat.len() != offset {
        return Err(malformed(format!("{} parameters stored, {} expected", flat.len(), offset)));
    }
    let params = ModelParams { arch: m.arch.clone(), tensors: split(&flat, &m.tensors) };
    let optimizer = match m.optimizer_t {
        None => None,
        Some(t) => {
            let flat = read_verified(dir, &m, OPTIMIZER_FILE)?;
            if flat.len() != 2 * offset {
                return Err(malformed("optimizer state has the wrong size".into()));
            }
            Some(OptimizerState { t, m: split(&flat[..offset], &m.tensors), v: split(&flat[offset..], &m.tensors) })
        }
    };
    Ok(Checkpoint {
        params,
        step: m.step,
        seed: m.seed,
        tasks_seen: m.tasks_seen,
        wall_ms: m.wall_ms,
        optimizer,
        extra: m.extra,
    })
}
