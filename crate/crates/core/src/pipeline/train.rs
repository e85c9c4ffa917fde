use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::prepare::{read_clip_labels, ClipLabel, PrepMeta};
use super::{
    assemble_clips, ensure_dir, read_json, require_file, score_videos, split_map, write_json,
    write_run_meta, EmbeddingStore,
};
use crate::data::{load_manifest, write_traces, EmbeddingClip, ScoreTrace, Split};
use crate::error::{Error, Result};
use crate::head::{load_checkpoint, save_checkpoint, HeadConfig, HeadMode, HeadParams};
use crate::prep::oversample;
use crate::trainer::{train, write_history, TrainConfig, TrainOutcome};

/// Head architecture choices; the patch width comes from the embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadOptions {
    pub mode: HeadMode,
    pub num_queries: usize,
    pub proj_dim: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
}

impl Default for HeadOptions {
    fn default() -> Self {
        let r = HeadConfig::reference();
        Self {
            mode: r.mode,
            num_queries: r.num_queries,
            proj_dim: r.proj_dim,
            hidden_dim: r.hidden_dim,
            dropout: r.dropout,
        }
    }
}

impl HeadOptions {
    pub fn config(&self, patch_dim: usize) -> HeadConfig {
        HeadConfig {
            mode: self.mode,
            patch_dim,
            num_queries: self.num_queries,
            proj_dim: self.proj_dim,
            hidden_dim: self.hidden_dim,
            dropout: self.dropout,
            ..HeadConfig::reference()
        }
    }
}

/// Loaded prepared data: split per video, clip labels and embeddings.
pub(crate) struct Prepared {
    pub meta: PrepMeta,
    pub splits: HashMap<String, Split>,
    pub labels: Vec<ClipLabel>,
}

pub(crate) fn load_prepared(prep_dir: &Path) -> Result<Prepared> {
    let manifest = prep_dir.join("prepared_manifest.csv");
    let clips = prep_dir.join("clips.csv");
    let meta_path = prep_dir.join("prep_meta.json");
    for p in [&manifest, &clips, &meta_path] {
        require_file(p)?;
    }
    let records = load_manifest(&manifest)?;
    let file = std::fs::File::open(&clips).map_err(|e| Error::io(&clips, e))?;
    Ok(Prepared {
        meta: read_json(&meta_path)?,
        splits: split_map(&records),
        labels: read_clip_labels(std::io::BufReader::new(file))?,
    })
}

/// Train and validation clip sets; positives in the training set are repeated
/// `oversample_rate` times. `train_videos` restricts the training videos.
pub(crate) fn clip_sets(
    labels: &[ClipLabel],
    splits: &HashMap<String, Split>,
    store: &EmbeddingStore,
    oversample_rate: usize,
    train_videos: Option<&HashSet<String>>,
) -> Result<(Vec<EmbeddingClip>, Vec<EmbeddingClip>)> {
    let mut train_clips = assemble_clips(labels, splits, store, Split::Train)?;
    if let Some(keep) = train_videos {
        train_clips.retain(|c| keep.contains(&c.video_id));
    }
    let train_clips = oversample(&train_clips, |c| c.label, oversample_rate);
    let val_clips = assemble_clips(labels, splits, store, Split::Val)?;
    if train_clips.is_empty() {
        return Err(Error::invalid(
            "no training clips; check the split fractions",
        ));
    }
    Ok((train_clips, val_clips))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub n_train_clips: usize,
    pub n_val_clips: usize,
    pub num_parameters: usize,
    pub best_epoch: usize,
    pub best_val_ap: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
}

impl TrainSummary {
    pub(crate) fn new(out: &TrainOutcome, n_train: usize, n_val: usize) -> Self {
        Self {
            n_train_clips: n_train,
            n_val_clips: n_val,
            num_parameters: out.params.num_parameters(),
            best_epoch: out.best_epoch,
            best_val_ap: out.best_val_ap,
            epochs_run: out.history.len(),
            stopped_early: out.stopped_early,
        }
    }
}

/// Trains on a prepared directory; writes `checkpoint.hdp`, `history.csv`
/// and `train_summary.json`.
pub fn cmd_train(
    prep_dir: &Path,
    embedding_index: &Path,
    out_dir: &Path,
    head: &HeadOptions,
    config: &TrainConfig,
    oversample_rate: Option<usize>,
) -> Result<TrainSummary> {
    require_file(embedding_index)?;
    config.validate()?;
    ensure_dir(out_dir)?;
    let prepared = load_prepared(prep_dir)?;
    let store = EmbeddingStore::load(embedding_index)?;
    let rate = oversample_rate.unwrap_or(prepared.meta.config.oversample_rate);
    if rate == 0 {
        return Err(Error::invalid("oversample rate must be at least 1"));
    }
    let (train_clips, val_clips) =
        clip_sets(&prepared.labels, &prepared.splits, &store, rate, None)?;
    let head_config = head.config(store.patch_dim());
    let outcome = train(&train_clips, &val_clips, &head_config, config)?;

    save_checkpoint(out_dir.join("checkpoint.hdp"), &outcome.params, config.seed)?;
    write_history(out_dir.join("history.csv"), &outcome.history)?;
    let summary = TrainSummary::new(&outcome, train_clips.len(), val_clips.len());
    write_json(&out_dir.join("train_summary.json"), &summary)?;
    write_run_meta(
        out_dir,
        "train",
        &[prep_dir, embedding_index],
        &["checkpoint.hdp", "history.csv", "train_summary.json"],
        serde_json::json!({ "head": head_config, "train": config, "oversample_rate": rate }),
    )?;
    Ok(summary)
}

/// Scores every prepared video in `split` (all splits when `None`); writes
/// `scores.csv`.
pub fn cmd_score(
    checkpoint: &Path,
    prep_dir: &Path,
    embedding_index: &Path,
    out_dir: &Path,
    split: Option<Split>,
) -> Result<Vec<ScoreTrace>> {
    require_file(checkpoint)?;
    require_file(embedding_index)?;
    ensure_dir(out_dir)?;
    let (params, _seed): (HeadParams, u64) = load_checkpoint(checkpoint)?;
    let prepared = load_prepared(prep_dir)?;
    let store = EmbeddingStore::load(embedding_index)?;
    if store.patch_dim() != params.config.patch_dim {
        return Err(Error::Shape(format!(
            "checkpoint expects width {}, embeddings have {}",
            params.config.patch_dim,
            store.patch_dim()
        )));
    }
    let keep = |id: &str| split.is_none() || prepared.splits.get(id) == split.as_ref();
    let traces = score_videos(&params, &prepared.labels, keep, &store)?;
    write_traces(out_dir.join("scores.csv"), &traces)?;
    write_run_meta(
        out_dir,
        "score",
        &[checkpoint, prep_dir, embedding_index],
        &["scores.csv"],
        serde_json::json!({ "split": split.map(|s| s.to_string()) }),
    )?;
    Ok(traces)
}
