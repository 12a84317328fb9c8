//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic          8 bytes   "PTPCKPT\0"
//! format         u32       currently 1
//! config_len     u32
//! config         JSON      {"net": NetConfig, "meta": any}
//! digest         32 bytes  SHA-256 of the config JSON
//! version        u64       parameter version
//! adam_step      u64
//! has_moments    u8        1 if Adam moments follow each tensor
//! tensor_count   u32
//! per tensor:
//!   name_len u32, name (UTF-8), rows u32, cols u32,
//!   rows·cols f64 values, then (if has_moments) first and second moments
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::network::{NetConfig, Network};
use super::params::{Adam, AdamConfig, ParamStore, Tensor};

const MAGIC: &[u8; 8] = b"PTPCKPT\0";
const FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint format {0}")]
    Format(u32),
    #[error("config digest mismatch")]
    Digest,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    net: NetConfig,
    meta: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: NetConfig,
    pub params: ParamStore,
    pub adam: Option<Adam>,
    /// Free-form metadata (trainer settings, problem kind, ...).
    pub meta: serde_json::Value,
}

/// Hex SHA-256 of a serialisable configuration.
pub fn config_digest<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_vec(config).expect("config serialises");
    hex::encode(Sha256::digest(&json))
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header =
            serde_json::to_vec(&Header { net: self.net.clone(), meta: self.meta.clone() }).expect("header serialises");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&Sha256::digest(&header));
        out.extend_from_slice(&self.params.version.to_le_bytes());
        out.extend_from_slice(&self.adam.as_ref().map_or(0, |a| a.step).to_le_bytes());
        out.push(self.adam.is_some() as u8);
        out.extend_from_slice(&(self.params.tensors.len() as u32).to_le_bytes());
        for (i, t) in self.params.tensors.iter().enumerate() {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.rows as u32).to_le_bytes());
            out.extend_from_slice(&(t.cols as u32).to_le_bytes());
            let mut put = |xs: &[f64]| xs.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
            put(&t.data);
            if let Some(a) = &self.adam {
                put(&a.m[i]);
                put(&a.v[i]);
            }
        }
        out
    }

    /// Parses a checkpoint and checks its tensors against the network the
    /// stored config describes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let format = read_u32(&mut r)?;
        if format != FORMAT {
            return Err(CheckpointError::Format(format));
        }
        let len = read_u32(&mut r)? as usize;
        let header_bytes = take(&mut r, len)?;
        let digest = take(&mut r, 32)?;
        if Sha256::digest(header_bytes).as_slice() != digest {
            return Err(CheckpointError::Digest);
        }
        let header: Header =
            serde_json::from_slice(header_bytes).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        let version = read_u64(&mut r)?;
        let step = read_u64(&mut r)?;
        let has_moments = take(&mut r, 1)?[0] == 1;
        let count = read_u32(&mut r)? as usize;

        let (_, fresh) = Network::new(header.net.clone()).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        if fresh.tensors.len() != count {
            return Err(CheckpointError::Malformed(format!(
                "{count} tensors stored, network has {}",
                fresh.tensors.len()
            )));
        }
        let mut tensors = Vec::with_capacity(count);
        let (mut m, mut v) = (Vec::new(), Vec::new());
        for expect in &fresh.tensors {
            let nlen = read_u32(&mut r)? as usize;
            let name = String::from_utf8(take(&mut r, nlen)?.to_vec())
                .map_err(|_| CheckpointError::Malformed("tensor name is not UTF-8".into()))?;
            let rows = read_u32(&mut r)? as usize;
            let cols = read_u32(&mut r)? as usize;
            if name != expect.name || rows != expect.rows || cols != expect.cols {
                return Err(CheckpointError::Malformed(format!(
                    "tensor {name} {rows}x{cols} does not match {} {}x{}",
                    expect.name, expect.rows, expect.cols
                )));
            }
            tensors.push(Tensor { name, rows, cols, data: read_f64s(&mut r, rows * cols)? });
            if has_moments {
                m.push(read_f64s(&mut r, rows * cols)?);
                v.push(read_f64s(&mut r, rows * cols)?);
            }
        }
        if !r.is_empty() {
            return Err(CheckpointError::Malformed(format!("{} trailing bytes", r.len())));
        }
        let adam = has_moments.then(|| Adam { config: AdamConfig::default(), m, v, step });
        Ok(Self { net: header.net, params: ParamStore { tensors, version }, adam, meta: header.meta })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Rebuilds the network structure for the stored parameters.
    pub fn network(&self) -> Network {
        Network::new(self.net.clone()).expect("config validated on load").0
    }
}

fn take<'a>(r: &mut &'a [u8], n: usize) -> Result<&'a [u8], CheckpointError> {
    if r.len() < n {
        return Err(CheckpointError::Malformed("unexpected end of file".into()));
    }
    let (head, tail) = r.split_at(n);
    *r = tail;
    Ok(head)
}

fn read_u32(r: &mut &[u8]) -> Result<u32, CheckpointError> {
    Ok(u32::from_le_bytes(take(r, 4)?.try_into().expect("4 bytes")))
}

fn read_u64(r: &mut &[u8]) -> Result<u64, CheckpointError> {
    Ok(u64::from_le_bytes(take(r, 8)?.try_into().expect("8 bytes")))
}

fn read_f64s(r: &mut &[u8], n: usize) -> Result<Vec<f64>, CheckpointError> {
    Ok(take(r, 8 * n)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}
