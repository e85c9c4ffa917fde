use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::prepare::{label_records, prepare_records};
use super::train::{clip_sets, HeadOptions};
use super::{
    ensure_dir, require_file, score_videos, split_map, write_json, write_run_meta, EmbeddingStore,
};
use crate::data::{load_manifest, Split, VideoRecord};
use crate::error::{Error, Result};
use crate::head::HeadMode;
use crate::metrics::{evaluate, EvalOptions};
use crate::prep::PrepConfig;
use crate::trainer::{train, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblateOptions {
    pub prep: PrepConfig,
    pub train: TrainConfig,
    pub head: HeadOptions,
    pub eval: EvalOptions,
    pub label_windows: Vec<f64>,
    pub oversample_rates: Vec<usize>,
    pub modes: Vec<HeadMode>,
    pub train_fractions: Vec<f64>,
    pub respect_existing: bool,
}

impl AblateOptions {
    pub fn new(prep: PrepConfig, train: TrainConfig, head: HeadOptions, eval: EvalOptions) -> Self {
        Self {
            prep,
            train,
            head,
            eval,
            label_windows: Vec::new(),
            oversample_rates: Vec::new(),
            modes: Vec::new(),
            train_fractions: Vec::new(),
            respect_existing: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.label_windows.is_empty()
            && self.oversample_rates.is_empty()
            && self.modes.is_empty()
            && self.train_fractions.is_empty()
        {
            return Err(Error::invalid("ablation grid is empty"));
        }
        if self.label_windows.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::invalid("label windows must be > 0"));
        }
        if self.oversample_rates.contains(&0) {
            return Err(Error::invalid("oversample rates must be >= 1"));
        }
        if self
            .train_fractions
            .iter()
            .any(|f| !(*f > 0.0 && *f <= 1.0))
        {
            return Err(Error::invalid("train fractions must lie in (0, 1]"));
        }
        self.prep.validate()?;
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub value: String,
    pub ap: f64,
    pub auc: f64,
    pub mtta_s: Option<f64>,
    pub detection_rate: f64,
    pub precision: Option<f64>,
    pub recall: f64,
    pub best_val_ap: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub n_train_clips: usize,
    pub num_parameters: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationTables {
    pub label_window: Vec<AblationRow>,
    pub oversampling: Vec<AblationRow>,
    pub architecture: Vec<AblationRow>,
    pub scaling: Vec<AblationRow>,
}

#[derive(Clone, Copy)]
enum Table {
    LabelWindow,
    Oversampling,
    Architecture,
    Scaling,
}

impl Table {
    fn file(self) -> &'static str {
        match self {
            Table::LabelWindow => "label_window.csv",
            Table::Oversampling => "oversampling.csv",
            Table::Architecture => "architecture.csv",
            Table::Scaling => "scaling.csv",
        }
    }

    fn column(self) -> &'static str {
        match self {
            Table::LabelWindow => "label_window_s",
            Table::Oversampling => "oversample_rate",
            Table::Architecture => "head_mode",
            Table::Scaling => "train_fraction",
        }
    }
}

struct GridPoint {
    table: Table,
    value: String,
    prep: PrepConfig,
    head: HeadOptions,
    fraction: f64,
}

fn fraction_subset(records: &[VideoRecord], fraction: f64, seed: u64) -> HashSet<String> {
    let mut train: Vec<(Vec<u8>, &str)> = records
        .iter()
        .filter(|r| r.split == Some(Split::Train))
        .map(|r| {
            let mut h = Sha256::new();
            h.update(seed.to_le_bytes());
            h.update(b"fraction");
            h.update(r.video_id.as_bytes());
            (h.finalize().to_vec(), r.video_id.as_str())
        })
        .collect();
    train.sort();
    let keep = ((train.len() as f64) * fraction).ceil() as usize;
    train
        .into_iter()
        .take(keep)
        .map(|(_, id)| id.to_string())
        .collect()
}

fn run_point(
    records: &[VideoRecord],
    store: &EmbeddingStore,
    point: &GridPoint,
    opts: &AblateOptions,
) -> Result<AblationRow> {
    let composition = prepare_records(records, &point.prep, opts.respect_existing)?;
    let labels = label_records(&composition.records, &point.prep)?;
    let splits = split_map(&composition.records);
    let subset = (point.fraction < 1.0)
        .then(|| fraction_subset(&composition.records, point.fraction, point.prep.split_seed));
    let (train_clips, val_clips) = clip_sets(
        &labels,
        &splits,
        store,
        point.prep.oversample_rate,
        subset.as_ref(),
    )?;
    let head = point.head.config(store.patch_dim());
    let outcome = train(&train_clips, &val_clips, &head, &opts.train)?;

    let test: Vec<VideoRecord> = composition
        .records
        .iter()
        .filter(|r| r.split == Some(Split::Test))
        .cloned()
        .collect();
    let test_ids: HashSet<&str> = test.iter().map(|r| r.video_id.as_str()).collect();
    let traces = score_videos(&outcome.params, &labels, |id| test_ids.contains(id), store)?;
    let report = evaluate(&traces, &test, &opts.eval)?;
    Ok(AblationRow {
        value: point.value.clone(),
        ap: report.ap,
        auc: report.auc,
        mtta_s: report.mtta_s,
        detection_rate: report.detection_rate,
        precision: report.precision,
        recall: report.recall,
        best_val_ap: outcome.best_val_ap,
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.history.len(),
        n_train_clips: train_clips.len(),
        num_parameters: outcome.params.num_parameters(),
    })
}

fn write_table(path: &Path, column: &str, rows: &[AblationRow]) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut csv = csv::Writer::from_path(path)?;
    csv.write_record([
        column,
        "ap",
        "auc",
        "mtta_s",
        "detection_rate",
        "precision",
        "recall",
        "best_val_ap",
        "best_epoch",
        "epochs_run",
        "n_train_clips",
        "num_parameters",
    ])?;
    for r in rows {
        csv.write_record([
            r.value.clone(),
            r.ap.to_string(),
            r.auc.to_string(),
            opt(r.mtta_s),
            r.detection_rate.to_string(),
            opt(r.precision),
            r.recall.to_string(),
            r.best_val_ap.to_string(),
            r.best_epoch.to_string(),
            r.epochs_run.to_string(),
            r.n_train_clips.to_string(),
            r.num_parameters.to_string(),
        ])?;
    }
    csv.flush().map_err(|e| Error::io(path, e))
}

/// Trains and evaluates one head per grid point, all with the same seed,
/// and writes one CSV per non-empty grid axis.
pub fn cmd_ablate(
    manifest: &Path,
    embedding_index: &Path,
    out_dir: &Path,
    opts: &AblateOptions,
) -> Result<AblationTables> {
    opts.validate()?;
    require_file(manifest)?;
    require_file(embedding_index)?;
    ensure_dir(out_dir)?;
    let records = load_manifest(manifest)?;
    let store = EmbeddingStore::load(embedding_index)?;

    let mut points = Vec::new();
    for &w in &opts.label_windows {
        points.push(GridPoint {
            table: Table::LabelWindow,
            value: w.to_string(),
            prep: PrepConfig {
                label_window_s: w,
                ..opts.prep.clone()
            },
            head: opts.head.clone(),
            fraction: 1.0,
        });
    }
    for &rate in &opts.oversample_rates {
        points.push(GridPoint {
            table: Table::Oversampling,
            value: rate.to_string(),
            prep: PrepConfig {
                oversample_rate: rate,
                ..opts.prep.clone()
            },
            head: opts.head.clone(),
            fraction: 1.0,
        });
    }
    for &mode in &opts.modes {
        points.push(GridPoint {
            table: Table::Architecture,
            value: mode.to_string(),
            prep: opts.prep.clone(),
            head: HeadOptions {
                mode,
                ..opts.head.clone()
            },
            fraction: 1.0,
        });
    }
    for &f in &opts.train_fractions {
        points.push(GridPoint {
            table: Table::Scaling,
            value: f.to_string(),
            prep: opts.prep.clone(),
            head: opts.head.clone(),
            fraction: f,
        });
    }

    let rows: Vec<AblationRow> = points
        .par_iter()
        .map(|p| {
            run_point(&records, &store, p, opts)
                .map_err(|e| Error::invalid(format!("{} = {}: {e}", p.table.column(), p.value)))
        })
        .collect::<Result<_>>()?;

    let mut tables = AblationTables::default();
    for (p, row) in points.iter().zip(rows) {
        match p.table {
            Table::LabelWindow => tables.label_window.push(row),
            Table::Oversampling => tables.oversampling.push(row),
            Table::Architecture => tables.architecture.push(row),
            Table::Scaling => tables.scaling.push(row),
        }
    }
    let mut written = Vec::new();
    for (table, rows) in [
        (Table::LabelWindow, &tables.label_window),
        (Table::Oversampling, &tables.oversampling),
        (Table::Architecture, &tables.architecture),
        (Table::Scaling, &tables.scaling),
    ] {
        if !rows.is_empty() {
            write_table(&out_dir.join(table.file()), table.column(), rows)?;
            written.push(table.file());
        }
    }
    write_json(&out_dir.join("ablation.json"), &tables)?;
    written.push("ablation.json");
    write_run_meta(
        out_dir,
        "ablate",
        &[manifest, embedding_index],
        &written,
        serde_json::to_value(opts)?,
    )?;
    Ok(tables)
}
