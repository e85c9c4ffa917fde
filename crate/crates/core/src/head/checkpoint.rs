//! `HDP1` checkpoints: magic, u32 LE header length, JSON header, then every
//! tensor as f64 LE in declaration order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{HeadConfig, HeadParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HDP1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: HeadConfig,
    probe_enabled: bool,
    mlp_enabled: bool,
    seed: u64,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

pub fn write_checkpoint(mut writer: impl Write, params: &HeadParams, seed: u64) -> Result<()> {
    let header = Header {
        config: params.config.clone(),
        probe_enabled: params.config.mode.probe_enabled(),
        mlp_enabled: params.config.mode.mlp_enabled(),
        seed,
        tensors: params
            .shapes()
            .into_iter()
            .map(|(name, shape)| TensorEntry {
                name: name.to_string(),
                shape,
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let len =
        u32::try_from(json.len()).map_err(|_| Error::Checkpoint("header too large".into()))?;
    let io = |e| Error::io("<checkpoint>", e);
    writer.write_all(CHECKPOINT_MAGIC).map_err(io)?;
    writer.write_all(&len.to_le_bytes()).map_err(io)?;
    writer.write_all(&json).map_err(io)?;
    for (_, tensor) in params.tensors() {
        for v in tensor {
            writer.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

/// Returns the parameters and the seed recorded with them.
pub fn read_checkpoint(mut reader: impl Read) -> Result<(HeadParams, u64)> {
    let mut prefix = [0u8; 8];
    reader
        .read_exact(&mut prefix)
        .map_err(|_| Error::Checkpoint("truncated preamble".into()))?;
    if &prefix[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic, expected HDP1".into()));
    }
    let len = u32::from_le_bytes(prefix[4..8].try_into().unwrap()) as usize;
    let mut json = vec![0u8; len];
    reader
        .read_exact(&mut json)
        .map_err(|_| Error::Checkpoint("truncated header".into()))?;
    let header: Header = serde_json::from_slice(&json)?;
    if header.config.mode.probe_enabled() != header.probe_enabled
        || header.config.mode.mlp_enabled() != header.mlp_enabled
    {
        return Err(Error::Checkpoint(
            "mode flags disagree with head mode".into(),
        ));
    }
    let mut params = HeadParams::zeros(header.config)?;
    let expected: Vec<TensorEntry> = params
        .shapes()
        .into_iter()
        .map(|(name, shape)| TensorEntry {
            name: name.to_string(),
            shape,
        })
        .collect();
    if expected != header.tensors {
        return Err(Error::Checkpoint(format!(
            "tensor layout {:?} does not match config",
            header.tensors
        )));
    }
    let mut buf = [0u8; 8];
    for (name, tensor) in params.tensors_mut() {
        for v in tensor.iter_mut() {
            reader
                .read_exact(&mut buf)
                .map_err(|_| Error::Checkpoint(format!("truncated tensor {name}")))?;
            *v = f64::from_le_bytes(buf);
        }
    }
    let mut rest = Vec::new();
    reader
        .read_to_end(&mut rest)
        .map_err(|e| Error::io("<checkpoint>", e))?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    params.check_shapes()?;
    Ok((params, header.seed))
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &HeadParams, seed: u64) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_checkpoint(&mut w, params, seed)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(HeadParams, u64)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file))
}
