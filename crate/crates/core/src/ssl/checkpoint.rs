//! Checkpoint format: `DDCK`, a little-endian `u32` version, a `u64` header length, a
//! JSON header, then raw little-endian `f32` blobs in header order.

use std::path::Path;

use devdiet_nn::{AdamWState, Parameterized};
use serde::{Deserialize, Serialize};

use super::encoder::Encoder;
use super::trainer::{MetricsRow, Trainer};
use crate::error::{Error, Result};
use crate::fsio::write_atomic;

const MAGIC: &[u8; 4] = b"DDCK";
const VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlobInfo {
    pub group: String,
    pub name: String,
    pub len: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config_hash: String,
    pub seed: u64,
    /// First epoch not yet trained.
    pub epoch: u32,
    pub center: Vec<f64>,
    pub history: Vec<MetricsRow>,
    pub optimizer_step: u64,
    pub blobs: Vec<BlobInfo>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

fn push_params<M: Parameterized + ?Sized>(group: &str, m: &M, blobs: &mut Vec<BlobInfo>, data: &mut Vec<u8>) {
    for p in m.params() {
        blobs.push(BlobInfo { group: group.into(), name: p.name.clone(), len: p.len() });
        for v in &p.value {
            data.extend_from_slice(&v.to_le_bytes());
        }
    }
}

fn push_moments(group: &str, moments: &[Vec<f32>], blobs: &mut Vec<BlobInfo>, data: &mut Vec<u8>) {
    for (i, m) in moments.iter().enumerate() {
        blobs.push(BlobInfo { group: group.into(), name: i.to_string(), len: m.len() });
        for v in m {
            data.extend_from_slice(&v.to_le_bytes());
        }
    }
}

/// Serializes the trainer's full state.
pub fn encode<E: Encoder>(t: &Trainer<E>, config_hash: &str, meta: serde_json::Value) -> Result<Vec<u8>> {
    let mut blobs = Vec::new();
    let mut data = Vec::new();
    push_params("student", &t.student, &mut blobs, &mut data);
    if let Some(teacher) = &t.teacher {
        push_params("teacher", teacher, &mut blobs, &mut data);
    }
    let st = t.optimizer.state();
    push_moments("adam_m", &st.first, &mut blobs, &mut data);
    push_moments("adam_v", &st.second, &mut blobs, &mut data);
    let header = CheckpointHeader {
        config_hash: config_hash.into(),
        seed: t.seed,
        epoch: t.epoch,
        center: t.center.clone(),
        history: t.history.clone(),
        optimizer_step: st.step,
        blobs,
        meta,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&data);
    Ok(out)
}

pub fn save<E: Encoder>(t: &Trainer<E>, path: &Path, config_hash: &str, meta: serde_json::Value) -> Result<()> {
    write_atomic(path, &encode(t, config_hash, meta)?)
}

/// Splits a checkpoint into its header and per-blob values.
pub fn decode(bytes: &[u8]) -> Result<(CheckpointHeader, Vec<Vec<f32>>)> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(body)?;
    let mut at = 16 + hlen;
    let mut values = Vec::with_capacity(header.blobs.len());
    for b in &header.blobs {
        let raw = bytes.get(at..at + 4 * b.len).ok_or_else(|| bad("truncated tensor data"))?;
        values.push(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect());
        at += 4 * b.len;
    }
    if at != bytes.len() {
        return Err(bad("trailing bytes after tensor data"));
    }
    Ok((header, values))
}

pub fn read_header(path: &Path) -> Result<CheckpointHeader> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode(&bytes)?.0)
}

fn load_params<M: Parameterized + ?Sized>(m: &mut M, group: &str, items: &mut Vec<(&BlobInfo, Vec<f32>)>) -> Result<()> {
    let taken: Vec<_> = items.iter().filter(|(b, _)| b.group == group).map(|(b, v)| ((*b).clone(), v.clone())).collect();
    items.retain(|(b, _)| b.group != group);
    let params = m.params_mut();
    if params.len() != taken.len() {
        return Err(Error::Checkpoint(format!("{group}: {} tensors stored, model has {}", taken.len(), params.len())));
    }
    for (p, (b, v)) in params.into_iter().zip(taken) {
        if p.name != b.name || p.len() != v.len() {
            return Err(Error::Checkpoint(format!("{group}: stored {} ({}) does not match {} ({})", b.name, v.len(), p.name, p.len())));
        }
        p.value.copy_from_slice(&v);
    }
    Ok(())
}

/// Restores `t` (built from the same plan, config and architecture) from `bytes`.
pub fn restore_from<E: Encoder>(t: &mut Trainer<E>, bytes: &[u8], config_hash: &str) -> Result<CheckpointHeader> {
    let (header, values) = decode(bytes)?;
    if header.config_hash != config_hash {
        return Err(Error::Checkpoint(format!(
            "checkpoint was written for config {} but the run config hashes to {config_hash}",
            header.config_hash
        )));
    }
    let mut items: Vec<(&BlobInfo, Vec<f32>)> = header.blobs.iter().zip(values).collect();
    load_params(&mut t.student, "student", &mut items)?;
    if let Some(teacher) = t.teacher.as_mut() {
        load_params(teacher, "teacher", &mut items)?;
    }
    let take = |g: &str, items: &[(&BlobInfo, Vec<f32>)]| -> Vec<Vec<f32>> {
        items.iter().filter(|(b, _)| b.group == g).map(|(_, v)| v.clone()).collect()
    };
    let state = AdamWState { step: header.optimizer_step, first: take("adam_m", &items), second: take("adam_v", &items) };
    t.optimizer.load_state(state);
    t.seed = header.seed;
    t.epoch = header.epoch;
    t.center = header.center.clone();
    t.history = header.history.clone();
    t.refresh_sampler();
    Ok(header)
}

/// Loads only the student weights, e.g. for evaluation.
pub fn load_student<M: Parameterized + ?Sized>(m: &mut M, path: &Path) -> Result<CheckpointHeader> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, values) = decode(&bytes)?;
    let mut items: Vec<(&BlobInfo, Vec<f32>)> = header.blobs.iter().zip(values).collect();
    load_params(m, "student", &mut items)?;
    Ok(header)
}

pub fn restore<E: Encoder>(t: &mut Trainer<E>, path: &Path, config_hash: &str) -> Result<CheckpointHeader> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    restore_from(t, &bytes, config_hash)
}
