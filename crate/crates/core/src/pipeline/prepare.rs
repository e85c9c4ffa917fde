use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ensure_dir, require_file, write_json, write_run_meta};
use crate::annotation::ego_involvement_table;
use crate::data::{format_seconds, load_manifest, parse_field, write_manifest, Split, VideoRecord};
use crate::error::{Error, Result};
use crate::prep::{clip_end_times, compose, label_clips, make_splits, Composition, PrepConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipLabel {
    pub video_id: String,
    pub clip_end_t: f64,
    pub label: bool,
}

pub fn write_clip_labels(writer: impl Write, labels: &[ClipLabel]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["video_id", "clip_end_t", "label"])?;
    for l in labels {
        csv.write_record([
            l.video_id.as_str(),
            &format_seconds(l.clip_end_t),
            if l.label { "1" } else { "0" },
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<clips>", e))
}

pub fn read_clip_labels(reader: impl Read) -> Result<Vec<ClipLabel>> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for row in csv.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let label = match row.get(2).unwrap_or("") {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::MalformedRow {
                    row: line,
                    field: "label".into(),
                    message: format!("expected 0 or 1, got `{other}`"),
                })
            }
        };
        out.push(ClipLabel {
            video_id: parse_field(row.get(0).unwrap_or(""), line, "video_id")?,
            clip_end_t: parse_field(row.get(1).unwrap_or(""), line, "clip_end_t")?,
            label,
        });
    }
    Ok(out)
}

/// Clip grid and labels for every record.
pub fn label_records(records: &[VideoRecord], config: &PrepConfig) -> Result<Vec<ClipLabel>> {
    let mut out = Vec::new();
    for r in records {
        let ends = clip_end_times(r, config.clip_frames);
        let labels = label_clips(r, &ends, config.label_window_s, config.label_anchor)?;
        out.extend(ends.into_iter().zip(labels).map(|(t, label)| ClipLabel {
            video_id: r.video_id.clone(),
            clip_end_t: t,
            label,
        }));
    }
    Ok(out)
}

/// Splits the source records, then composes the ego-centric set so carved
/// negatives share their parent's split.
pub fn prepare_records(
    records: &[VideoRecord],
    config: &PrepConfig,
    respect_existing: bool,
) -> Result<Composition> {
    let split = make_splits(
        records,
        config.fractions,
        config.split_seed,
        respect_existing,
    )?;
    compose(&split, config)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepMeta {
    pub config: PrepConfig,
    pub label_window_s: f64,
    pub n_records: usize,
    pub n_clips: usize,
    pub n_positive_clips: usize,
    pub splits: SplitCounts,
    pub removed_horizon: Vec<String>,
    pub removed_non_ego: Vec<String>,
    /// Positives kept with an event exactly at the horizon.
    pub horizon_boundary: Vec<String>,
}

pub type PrepSummary = PrepMeta;

/// Writes `prepared_manifest.csv`, `clips.csv`, `ego_table.csv`,
/// `composition.csv` and `prep_meta.json`.
pub fn cmd_prep(
    manifest_path: &Path,
    out_dir: &Path,
    config: &PrepConfig,
    respect_existing: bool,
) -> Result<PrepSummary> {
    require_file(manifest_path)?;
    config.validate()?;
    ensure_dir(out_dir)?;
    let records = load_manifest(manifest_path)?;
    let composition = prepare_records(&records, config, respect_existing)?;
    let labels = label_records(&composition.records, config)?;

    write_manifest(out_dir.join("prepared_manifest.csv"), &composition.records)?;
    let clips_path = out_dir.join("clips.csv");
    let file = std::fs::File::create(&clips_path).map_err(|e| Error::io(&clips_path, e))?;
    write_clip_labels(std::io::BufWriter::new(file), &labels)?;

    let mut ego = csv::Writer::from_path(out_dir.join("ego_table.csv"))?;
    for row in ego_involvement_table(&records, config.horizon_s) {
        ego.serialize(row)?;
    }
    ego.flush().map_err(|e| Error::io(out_dir, e))?;
    let mut comp = csv::Writer::from_path(out_dir.join("composition.csv"))?;
    for row in &composition.rows {
        comp.serialize(row)?;
    }
    comp.flush().map_err(|e| Error::io(out_dir, e))?;

    let mut splits = SplitCounts::default();
    for r in &composition.records {
        match r.split {
            Some(Split::Train) => splits.train += 1,
            Some(Split::Val) => splits.val += 1,
            Some(Split::Test) => splits.test += 1,
            None => {}
        }
    }
    let ids = |rs: &[VideoRecord]| rs.iter().map(|r| r.video_id.clone()).collect::<Vec<_>>();
    let meta = PrepMeta {
        config: config.clone(),
        label_window_s: config.label_window_s,
        n_records: composition.records.len(),
        n_clips: labels.len(),
        n_positive_clips: labels.iter().filter(|l| l.label).count(),
        splits,
        removed_horizon: ids(&composition.removed_horizon),
        removed_non_ego: ids(&composition.removed_non_ego),
        horizon_boundary: composition
            .records
            .iter()
            .filter(|r| r.outcome.is_positive() && r.t_event == Some(config.horizon_s))
            .map(|r| r.video_id.clone())
            .collect(),
    };
    write_json(&out_dir.join("prep_meta.json"), &meta)?;
    write_run_meta(
        out_dir,
        "prep",
        &[manifest_path],
        &[
            "prepared_manifest.csv",
            "clips.csv",
            "ego_table.csv",
            "composition.csv",
            "prep_meta.json",
        ],
        serde_json::json!({ "prep": config, "respect_existing": respect_existing }),
    )?;
    Ok(meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_labels_round_trip() {
        let labels = vec![
            ClipLabel {
                video_id: "a".into(),
                clip_end_t: 0.5333333333333333,
                label: false,
            },
            ClipLabel {
                video_id: "a#synneg".into(),
                clip_end_t: 1.0,
                label: true,
            },
        ];
        let mut buf = Vec::new();
        write_clip_labels(&mut buf, &labels).unwrap();
        assert_eq!(read_clip_labels(buf.as_slice()).unwrap(), labels);
        assert!(read_clip_labels("video_id,clip_end_t,label\na,1.0,2\n".as_bytes()).is_err());
    }
}
