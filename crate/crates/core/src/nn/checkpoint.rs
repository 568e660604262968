//! Checkpoint file format: a little-endian `u32` header length, a JSON
//! header (model config, step, RNG provenance, parameter manifest), then raw
//! little-endian `f32` parameter blocks in declaration order.

use super::params::ParamSet;
use super::tensor::Tensor;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const CHECKPOINT_FORMAT: &str = "boolicl-ckpt-v1";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    /// Model configuration, opaque to this layer (the models module owns the
    /// schema).
    pub config: serde_json::Value,
    /// Optimizer steps completed.
    pub step: u64,
    /// RNG provenance: in this crate's deterministic scheme the master seed
    /// plus the step count fully determine the sampling stream, so that is
    /// what trainers store here.
    pub rng: serde_json::Value,
    pub params: Vec<ParamBlock>,
}

pub fn save_checkpoint(
    path: &Path,
    config: serde_json::Value,
    step: u64,
    rng: serde_json::Value,
    params: &ParamSet<f32>,
) -> Result<()> {
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.to_string(),
        config,
        step,
        rng,
        params: params
            .iter()
            .map(|(name, t)| ParamBlock { name: name.to_string(), shape: t.shape().to_vec() })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for (_, tensor) in params.iter() {
        for &v in tensor.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, ParamSet<f32>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes)?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(Error::invalid("checkpoint", format!("unknown format {:?}", header.format)));
    }
    let mut params = ParamSet::new();
    for block in &header.params {
        let numel: usize = block.shape.iter().product();
        let mut bytes = vec![0u8; numel * 4];
        r.read_exact(&mut bytes)?;
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        params.insert(&block.name, Tensor::new(block.shape.clone(), data)?)?;
    }
    // Trailing garbage would mean the manifest disagrees with the blocks.
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::invalid("checkpoint", "trailing bytes after parameter blocks"));
    }
    Ok((header, params))
}
