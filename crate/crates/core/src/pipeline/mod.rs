//! File-level workflows behind the command-line tool.

mod ablate;
mod annotate;
mod evaluate;
mod fcw;
mod prepare;
mod report;
mod train;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use ablate::{cmd_ablate, AblateOptions, AblationRow, AblationTables};
pub use annotate::{cmd_annotate, AnnotateSummary};
pub use evaluate::{cmd_eval, EvalOutput, MethodReport};
pub use fcw::cmd_fcw;
pub use prepare::{
    cmd_prep, read_clip_labels, write_clip_labels, ClipLabel, PrepMeta, PrepSummary,
};
pub use report::cmd_report;
pub use train::{cmd_score, cmd_train, HeadOptions, TrainSummary};

use crate::data::{load_embedding, load_embedding_index, ScoreTrace, Split, VideoRecord};
use crate::error::{Error, Result};
use crate::head::{Dropout, ForwardPass, HeadParams};
use crate::prep::SYNTHETIC_NEGATIVE_SUFFIX;

pub const OUT_ROOT_ENV: &str = "EGOCOL_OUT_ROOT";

/// `<root>/<command>-<digest>` where root comes from `EGOCOL_OUT_ROOT` (default
/// `runs`) and the digest covers the resolved configuration.
pub fn default_out_dir(command: &str, config: &serde_json::Value) -> PathBuf {
    let root = std::env::var_os(OUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    let digest = Sha256::digest(config.to_string().as_bytes());
    let tag: String = digest[..4].iter().map(|b| format!("{b:02x}")).collect();
    root.join(format!("{command}-{tag}"))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write-check");
    std::fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    std::fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

pub fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "input file {} does not exist",
            path.display()
        )))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub command: String,
    pub version: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub config: serde_json::Value,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_run_meta(
    out_dir: &Path,
    command: &str,
    inputs: &[&Path],
    outputs: &[&str],
    config: serde_json::Value,
) -> Result<()> {
    let meta = RunMeta {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        config,
    };
    write_json(&out_dir.join("run_meta.json"), &meta)
}

/// Source video of a record: carved negatives share their parent's footage.
pub fn footage_id(video_id: &str) -> &str {
    video_id
        .strip_suffix(SYNTHETIC_NEGATIVE_SUFFIX)
        .unwrap_or(video_id)
}

fn clip_key(video_id: &str, t: f64) -> (String, String) {
    (footage_id(video_id).to_string(), crate::data::time_key(t))
}

/// All clip embeddings named by an index file, held in memory.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    clips: HashMap<(String, String), Array2<f64>>,
    patch_dim: usize,
}

impl EmbeddingStore {
    pub fn load(index_path: &Path) -> Result<Self> {
        let entries = load_embedding_index(index_path)?;
        if entries.is_empty() {
            return Err(Error::invalid(format!(
                "{} lists no embeddings",
                index_path.display()
            )));
        }
        let loaded: Vec<((String, String), Array2<f64>)> = entries
            .par_iter()
            .map(|e| Ok((e.key(), load_embedding(&e.path)?)))
            .collect::<Result<_>>()?;
        let patch_dim = loaded[0].1.ncols();
        if let Some((k, m)) = loaded.iter().find(|(_, m)| m.ncols() != patch_dim) {
            return Err(Error::Shape(format!(
                "embedding {}@{} has width {}, expected {patch_dim}",
                k.0,
                k.1,
                m.ncols()
            )));
        }
        Ok(Self {
            clips: loaded.into_iter().collect(),
            patch_dim,
        })
    }

    pub fn from_clips(clips: impl IntoIterator<Item = (String, f64, Array2<f64>)>) -> Result<Self> {
        let mut map = HashMap::new();
        let mut dim = None;
        for (id, t, m) in clips {
            if *dim.get_or_insert(m.ncols()) != m.ncols() {
                return Err(Error::Shape("embeddings of differing width".into()));
            }
            map.insert(clip_key(&id, t), m);
        }
        Ok(Self {
            clips: map,
            patch_dim: dim.ok_or_else(|| Error::invalid("no embeddings"))?,
        })
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_dim
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn get(&self, video_id: &str, t: f64) -> Option<&Array2<f64>> {
        self.clips.get(&clip_key(video_id, t))
    }
}

/// Clip-level sets per split, from labels and stored embeddings.
pub fn assemble_clips(
    labels: &[ClipLabel],
    splits: &HashMap<String, Split>,
    store: &EmbeddingStore,
    split: Split,
) -> Result<Vec<crate::data::EmbeddingClip>> {
    let mut missing = Vec::new();
    let mut out = Vec::new();
    for l in labels {
        if splits.get(&l.video_id) != Some(&split) {
            continue;
        }
        match store.get(&l.video_id, l.clip_end_t) {
            Some(x) => out.push(crate::data::EmbeddingClip::new(
                l.video_id.clone(),
                l.clip_end_t,
                x.clone(),
                l.label,
            )?),
            None => missing.push(format!("{}@{}", l.video_id, l.clip_end_t)),
        }
    }
    if !missing.is_empty() {
        let shown: Vec<_> = missing.iter().take(10).cloned().collect();
        return Err(Error::invalid(format!(
            "{} clips have no embedding, e.g. {}",
            missing.len(),
            shown.join(", ")
        )));
    }
    Ok(out)
}

/// Eval-mode score traces for every video that has labeled clips, in
/// first-appearance order.
pub fn score_videos(
    params: &HeadParams,
    labels: &[ClipLabel],
    keep: impl Fn(&str) -> bool,
    store: &EmbeddingStore,
) -> Result<Vec<ScoreTrace>> {
    let mut grouped: indexmap::IndexMap<&str, Vec<f64>> = indexmap::IndexMap::new();
    for l in labels.iter().filter(|l| keep(&l.video_id)) {
        grouped
            .entry(l.video_id.as_str())
            .or_default()
            .push(l.clip_end_t);
    }
    let groups: Vec<(&str, Vec<f64>)> = grouped.into_iter().collect();
    groups
        .par_iter()
        .map(|(id, times)| {
            let samples = times
                .iter()
                .map(|&t| {
                    let x = store
                        .get(id, t)
                        .ok_or_else(|| Error::invalid(format!("no embedding for clip {id}@{t}")))?;
                    let p = ForwardPass::run(x.view(), params, Dropout::off())?.probability;
                    Ok((t, p))
                })
                .collect::<Result<Vec<_>>>()?;
            ScoreTrace::new(*id, samples)
        })
        .collect()
}

pub(crate) fn split_map(records: &[VideoRecord]) -> HashMap<String, Split> {
    records
        .iter()
        .filter_map(|r| r.split.map(|s| (r.video_id.clone(), s)))
        .collect()
}
