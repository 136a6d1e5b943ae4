//! Binary checkpoint format.
//!
//! ```text
//! "DFUN" | version: u32 LE | header_len: u64 LE | JSON header | f32 LE payloads
//! ```
//!
//! The header holds the network spec, an ordered tensor index
//! (name, shape, byte offset, byte length, group) and flags. Payloads follow
//! the index order with no padding; offsets are relative to the payload start.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{NetworkSpec, Params};
use crate::optim::AdamState;
use crate::Tensor;

pub const MAGIC: &[u8; 4] = b"DFUN";
pub const VERSION: u32 = 1;

const PREFIX_LEN: usize = 4 + 4 + 8;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint: bad magic bytes")]
    BadMagic,
    #[error("unsupported checkpoint version {0} (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error("truncated checkpoint: {0}")]
    Truncated(String),
    #[error("inconsistent checkpoint: {0}")]
    Inconsistent(String),
    #[error("malformed checkpoint header: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A decoded checkpoint. Parameter values are the stored 32-bit floats widened to f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub spec: NetworkSpec,
    pub params: Params,
    pub optimizer: Option<AdamState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Group {
    Param,
    AdamM,
    AdamV,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
    length: u64,
    group: Group,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdamMeta {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Flags {
    precision: String,
    optimizer: Option<AdamMeta>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    spec: NetworkSpec,
    tensors: Vec<TensorEntry>,
    flags: Flags,
}

fn inconsistent(msg: impl Into<String>) -> CheckpointError {
    CheckpointError::Inconsistent(msg.into())
}

/// Checks that `params` holds exactly the spec's slots, in order, with matching shapes.
fn check_params(spec: &NetworkSpec, params: &Params, what: &str) -> Result<(), CheckpointError> {
    let slots = spec.param_slots();
    if slots.len() != params.len() {
        return Err(inconsistent(format!(
            "{what}: {} tensors, spec declares {}",
            params.len(),
            slots.len()
        )));
    }
    for (slot, (name, t)) in slots.iter().zip(params) {
        if &slot.name != name || slot.shape != t.shape() {
            return Err(inconsistent(format!(
                "{what}: tensor {name:?} {:?} where spec expects {:?} {:?}",
                t.shape(),
                slot.name,
                slot.shape
            )));
        }
    }
    Ok(())
}

/// Serializes a checkpoint to bytes. Values are narrowed to f32.
pub fn encode_checkpoint(
    spec: &NetworkSpec,
    params: &Params,
    optimizer: Option<&AdamState>,
) -> Result<Vec<u8>, CheckpointError> {
    spec.validate().map_err(|e| inconsistent(e.to_string()))?;
    check_params(spec, params, "parameters")?;
    let mut groups: Vec<(Group, &Params)> = vec![(Group::Param, params)];
    if let Some(opt) = optimizer {
        check_params(spec, &opt.m, "first moments")?;
        check_params(spec, &opt.v, "second moments")?;
        groups.push((Group::AdamM, &opt.m));
        groups.push((Group::AdamV, &opt.v));
    }

    let mut tensors = Vec::new();
    let mut offset = 0u64;
    for (group, set) in &groups {
        for (name, t) in set.iter() {
            let length = 4 * t.len() as u64;
            tensors.push(TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                offset,
                length,
                group: *group,
            });
            offset += length;
        }
    }
    let header = Header {
        spec: spec.clone(),
        tensors,
        flags: Flags {
            precision: "f32".into(),
            optimizer: optimizer.map(|o| AdamMeta {
                beta1: o.beta1,
                beta2: o.beta2,
                epsilon: o.epsilon,
                step: o.step,
            }),
        },
    };
    let json = serde_json::to_vec(&header)?;

    let mut out = Vec::with_capacity(PREFIX_LEN + json.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, set) in &groups {
        for t in set.values() {
            for &v in t.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Parses checkpoint bytes. Every size is bounds-checked before allocation.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    if bytes.len() < 4 {
        return Err(CheckpointError::Truncated("missing magic".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes.len() < PREFIX_LEN {
        return Err(CheckpointError::Truncated("missing version or header length".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let rest = &bytes[PREFIX_LEN..];
    if header_len > rest.len() as u64 {
        return Err(CheckpointError::Truncated(format!(
            "header claims {header_len} bytes, {} available",
            rest.len()
        )));
    }
    let (json, payload) = rest.split_at(header_len as usize);
    let header: Header = serde_json::from_slice(json)?;
    header.spec.validate().map_err(|e| inconsistent(e.to_string()))?;
    if header.flags.precision != "f32" {
        return Err(inconsistent(format!("unknown precision {:?}", header.flags.precision)));
    }

    let mut expected_offset = 0u64;
    for t in &header.tensors {
        let numel = t
            .shape
            .iter()
            .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| inconsistent(format!("tensor {:?} shape overflows", t.name)))?;
        if numel != t.length {
            return Err(inconsistent(format!(
                "tensor {:?}: shape {:?} needs {numel} bytes, index says {}",
                t.name, t.shape, t.length
            )));
        }
        if t.offset != expected_offset {
            return Err(inconsistent(format!(
                "tensor {:?} at offset {}, expected {expected_offset}",
                t.name, t.offset
            )));
        }
        expected_offset = expected_offset
            .checked_add(t.length)
            .ok_or_else(|| inconsistent("payload size overflows"))?;
    }
    if expected_offset > payload.len() as u64 {
        return Err(CheckpointError::Truncated(format!(
            "payload holds {} bytes, index needs {expected_offset}",
            payload.len()
        )));
    }
    if expected_offset < payload.len() as u64 {
        return Err(inconsistent(format!(
            "{} trailing bytes after the last tensor",
            payload.len() as u64 - expected_offset
        )));
    }

    let mut groups = [Params::new(), Params::new(), Params::new()];
    for t in &header.tensors {
        let raw = &payload[t.offset as usize..(t.offset + t.length) as usize];
        let values: Vec<f64> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
            .collect();
        let tensor = Tensor::new(&t.shape, values).map_err(|e| inconsistent(format!("tensor {:?}: {e}", t.name)))?;
        let slot = &mut groups[t.group as usize];
        if slot.insert(t.name.clone(), tensor).is_some() {
            return Err(inconsistent(format!("duplicate tensor {:?}", t.name)));
        }
    }
    let [params, m, v] = groups;
    check_params(&header.spec, &params, "parameters")?;
    let optimizer = match header.flags.optimizer {
        Some(meta) => {
            check_params(&header.spec, &m, "first moments")?;
            check_params(&header.spec, &v, "second moments")?;
            Some(AdamState {
                beta1: meta.beta1,
                beta2: meta.beta2,
                epsilon: meta.epsilon,
                step: meta.step,
                m,
                v,
            })
        }
        None if m.is_empty() && v.is_empty() => None,
        None => return Err(inconsistent("optimizer tensors present without optimizer flags")),
    };
    Ok(Checkpoint {
        version,
        spec: header.spec,
        params,
        optimizer,
    })
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    spec: &NetworkSpec,
    params: &Params,
    optimizer: Option<&AdamState>,
) -> Result<(), CheckpointError> {
    let bytes = encode_checkpoint(spec, params, optimizer)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, CheckpointError> {
    decode_checkpoint(&fs::read(path)?)
}
