//! `EMB1` embedding files and the embedding index CSV.
//!
//! Layout: magic `EMB1`, P and D as u32 LE, then P·D f32 LE values, patch-major.
//! The index CSV `video_id,clip_end_t,path` maps clips to files; relative paths
//! resolve against the index file's directory.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{format_seconds, time_key};
use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"EMB1";

pub fn load_embedding(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embedding(BufReader::new(file))
        .map_err(|e| Error::Embedding(format!("{}: {e}", path.display())))
}

pub fn read_embedding(mut reader: impl Read) -> Result<Array2<f64>> {
    let mut header = [0u8; 12];
    reader
        .read_exact(&mut header)
        .map_err(|_| Error::Embedding("truncated header".into()))?;
    if &header[..4] != EMBEDDING_MAGIC {
        return Err(Error::Embedding("bad magic, expected EMB1".into()));
    }
    let patches = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    if patches == 0 || dim == 0 {
        return Err(Error::Embedding(format!("empty shape {patches}x{dim}")));
    }
    let expected = patches
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Embedding("shape overflows".into()))?;
    let mut payload = Vec::with_capacity(expected);
    reader
        .read_to_end(&mut payload)
        .map_err(|e| Error::Embedding(e.to_string()))?;
    if payload.len() < expected {
        return Err(Error::Embedding(format!(
            "truncated payload: {} values for a {patches}x{dim} header",
            payload.len() / 4
        )));
    }
    if payload.len() > expected {
        return Err(Error::Embedding(format!(
            "payload longer than {patches}x{dim} header ({} extra bytes)",
            payload.len() - expected
        )));
    }
    let mut values = Vec::with_capacity(patches * dim);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::NonFinite(format!(
                "embedding value at patch {}, dim {}",
                i / dim,
                i % dim
            )));
        }
        values.push(v as f64);
    }
    Ok(Array2::from_shape_vec((patches, dim), values).expect("length checked"))
}

pub fn write_embedding(path: impl AsRef<Path>, patches: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_embedding_to(&mut w, patches)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_embedding_to(mut writer: impl Write, patches: &Array2<f64>) -> Result<()> {
    let (p, d) = patches.dim();
    let to_u32 = |n: usize| {
        u32::try_from(n).map_err(|_| Error::Embedding(format!("dimension {n} exceeds u32")))
    };
    let mut buf = Vec::with_capacity(12 + 4 * p * d);
    buf.extend_from_slice(EMBEDDING_MAGIC);
    buf.extend_from_slice(&to_u32(p)?.to_le_bytes());
    buf.extend_from_slice(&to_u32(d)?.to_le_bytes());
    for &v in patches.iter() {
        let v = v as f32;
        if !v.is_finite() {
            return Err(Error::NonFinite("embedding value".into()));
        }
        buf.extend_from_slice(&v.to_le_bytes());
    }
    writer
        .write_all(&buf)
        .map_err(|e| Error::io("<embedding>", e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingIndexEntry {
    pub video_id: String,
    pub clip_end_t: f64,
    pub path: PathBuf,
}

impl EmbeddingIndexEntry {
    pub fn key(&self) -> (String, String) {
        (self.video_id.clone(), time_key(self.clip_end_t))
    }
}

pub fn load_embedding_index(path: impl AsRef<Path>) -> Result<Vec<EmbeddingIndexEntry>> {
    let path = path.as_ref();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut out = Vec::new();
    for row in csv.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let video_id = row.get(0).unwrap_or("").to_string();
        if video_id.is_empty() {
            return Err(Error::MalformedRow {
                row: line,
                field: "video_id".into(),
                message: "required value is empty".into(),
            });
        }
        let clip_end_t: f64 =
            super::manifest::parse_field(row.get(1).unwrap_or(""), line, "clip_end_t")?;
        let rel = PathBuf::from(row.get(2).unwrap_or(""));
        if rel.as_os_str().is_empty() {
            return Err(Error::MalformedRow {
                row: line,
                field: "path".into(),
                message: "required value is empty".into(),
            });
        }
        let path = if rel.is_absolute() {
            rel
        } else {
            base.join(rel)
        };
        out.push(EmbeddingIndexEntry {
            video_id,
            clip_end_t,
            path,
        });
    }
    Ok(out)
}

/// Writes an index whose paths are stored relative to `relative_to` when possible.
pub fn write_embedding_index(
    path: impl AsRef<Path>,
    entries: &[EmbeddingIndexEntry],
    relative_to: &Path,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut csv = csv::Writer::from_writer(file);
    csv.write_record(["video_id", "clip_end_t", "path"])?;
    for e in entries {
        let p = e.path.strip_prefix(relative_to).unwrap_or(&e.path);
        csv.write_record([
            e.video_id.as_str(),
            &format_seconds(e.clip_end_t),
            &p.to_string_lossy(),
        ])?;
    }
    csv.flush().map_err(|e| Error::io(path, e))
}
