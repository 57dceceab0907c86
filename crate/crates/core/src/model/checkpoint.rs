//! Self-describing binary checkpoints.
//!
//! Layout (little-endian): the magic `ASTRO1`; a `u32` length and the
//! JSON-encoded [`AstroConfig`]; a `u32` tensor count; then per tensor a
//! `u32` name length, the UTF-8 name, a `u32` rank, `u64` dimensions and
//! the row-major `f64` values.

use std::io::{Read, Write};
use std::path::Path;

use super::config::AstroConfig;
use super::net::AstroModel;
use crate::error::{AstroError, Result};
use crate::nn::Tensor;
use crate::topology::TopologyGraph;

pub const MAGIC: &[u8; 6] = b"ASTRO1";

/// Decoded checkpoint contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: AstroConfig,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn from_model(model: &AstroModel) -> Self {
        Checkpoint {
            config: model.config().clone(),
            tensors: model
                .params
                .named_tensors()
                .map(|(n, t)| (n.to_string(), t.clone()))
                .collect(),
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.push((name.into(), t));
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        let cfg = serde_json::to_vec(&self.config).expect("config serializes");
        buf.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        buf.extend_from_slice(&cfg);
        buf.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                buf.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf
    }

    pub fn decode(mut bytes: &[u8]) -> Result<Self> {
        let mut magic = [0u8; 6];
        read_exact(&mut bytes, &mut magic)?;
        if &magic != MAGIC {
            return Err(AstroError::Checkpoint("not an ASTRO1 checkpoint".into()));
        }
        let cfg_len = read_u32(&mut bytes)? as usize;
        let cfg_bytes = take(&mut bytes, cfg_len)?;
        let config: AstroConfig = serde_json::from_slice(cfg_bytes)
            .map_err(|e| AstroError::Checkpoint(format!("bad config block: {e}")))?;
        let count = read_u32(&mut bytes)? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = read_u32(&mut bytes)? as usize;
            let name = std::str::from_utf8(take(&mut bytes, name_len)?)
                .map_err(|_| AstroError::Checkpoint("tensor name is not UTF-8".into()))?
                .to_string();
            let rank = read_u32(&mut bytes)? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                let mut b = [0u8; 8];
                read_exact(&mut bytes, &mut b)?;
                shape.push(u64::from_le_bytes(b) as usize);
            }
            let n: usize = shape.iter().product();
            let raw = take(&mut bytes, n * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push((name, Tensor::new(shape, data)?));
        }
        if !bytes.is_empty() {
            return Err(AstroError::Checkpoint(format!("{} trailing bytes", bytes.len())));
        }
        Ok(Checkpoint { config, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| AstroError::io(path, e))?;
        f.write_all(&self.encode()).map_err(|e| AstroError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| AstroError::io(path, e))?;
        Self::decode(&bytes)
    }

    /// Rebuilds the model; fails if `expected` is given and differs from the
    /// stored configuration, or if any weight is missing or misshapen.
    pub fn into_model(&self, graph: &TopologyGraph, expected: Option<&AstroConfig>) -> Result<AstroModel> {
        if let Some(exp) = expected {
            if exp != &self.config {
                return Err(AstroError::Checkpoint(
                    "checkpoint configuration does not match the requested configuration".into(),
                ));
            }
        }
        let mut model = AstroModel::new(&self.config, graph)?;
        let names: Vec<String> = model.params.named_tensors().map(|(n, _)| n.to_string()).collect();
        for name in names {
            let t = self
                .tensor(&name)
                .ok_or_else(|| AstroError::Checkpoint(format!("missing tensor '{name}'")))?;
            model.params.set_tensor(&name, t)?;
        }
        Ok(model)
    }
}

fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(AstroError::Checkpoint("unexpected end of checkpoint".into()));
    }
    let (head, tail) = bytes.split_at(n);
    *bytes = tail;
    Ok(head)
}

fn read_exact(bytes: &mut &[u8], out: &mut [u8]) -> Result<()> {
    out.copy_from_slice(take(bytes, out.len())?);
    Ok(())
}

fn read_u32(bytes: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(bytes, &mut b)?;
    Ok(u32::from_le_bytes(b))
}
