use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ensure_dir, require_file, write_json, write_run_meta};
use crate::annotation::{consensus_by_video, reaction_time_stats, ReactionStats};
use crate::data::{load_manifest, load_marks, write_manifest};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotateSummary {
    pub updated: usize,
    pub kept_existing: usize,
    /// Positives with neither marks nor an existing alert time.
    pub skipped: Vec<String>,
    /// Marked videos absent from the manifest.
    pub unknown: Vec<String>,
    pub stats: Option<ReactionStats>,
}

/// Fills `t_alert` with the consensus of the annotators' marks and writes
/// `manifest.csv`, `reaction_stats.json`, `reaction_cdf.csv` and `skipped.csv`.
pub fn cmd_annotate(
    marks_path: &Path,
    manifest_path: &Path,
    out_dir: &Path,
    respect_existing: bool,
) -> Result<AnnotateSummary> {
    require_file(marks_path)?;
    require_file(manifest_path)?;
    ensure_dir(out_dir)?;
    let marks = load_marks(marks_path)?;
    if marks.is_empty() {
        return Err(Error::invalid(format!(
            "{} contains no marks",
            marks_path.display()
        )));
    }
    let consensus = consensus_by_video(&marks)?;
    let mut records = load_manifest(manifest_path)?;
    let ids: HashSet<&str> = records.iter().map(|r| r.video_id.as_str()).collect();
    let unknown: Vec<String> = consensus
        .keys()
        .filter(|id| !ids.contains(id.as_str()))
        .cloned()
        .collect();

    let (mut updated, mut kept_existing) = (0, 0);
    let mut skipped = Vec::new();
    for r in &mut records {
        match consensus.get(&r.video_id) {
            Some(_) if respect_existing && r.t_alert.is_some() => kept_existing += 1,
            Some(&t) => {
                r.t_alert = Some(t);
                r.validate()?;
                updated += 1;
            }
            None if r.outcome.is_positive() && r.t_alert.is_none() => {
                skipped.push(r.video_id.clone())
            }
            None => {}
        }
    }
    for id in &unknown {
        log::warn!("marks for `{id}` match no manifest record");
    }

    write_manifest(out_dir.join("manifest.csv"), &records)?;
    let mut skipped_csv = csv::Writer::from_path(out_dir.join("skipped.csv"))?;
    skipped_csv.write_record(["video_id", "reason"])?;
    for id in &skipped {
        skipped_csv.write_record([id.as_str(), "no annotator marks"])?;
    }
    for id in &unknown {
        skipped_csv.write_record([id.as_str(), "not in manifest"])?;
    }
    skipped_csv.flush().map_err(|e| Error::io(out_dir, e))?;

    let stats = reaction_time_stats(&records).ok();
    write_json(&out_dir.join("reaction_stats.json"), &stats)?;
    let mut cdf = csv::Writer::from_path(out_dir.join("reaction_cdf.csv"))?;
    cdf.write_record(["reaction_s", "cdf"])?;
    for (v, f) in stats.iter().flat_map(|s| s.cdf.iter()) {
        cdf.write_record([v.to_string(), f.to_string()])?;
    }
    cdf.flush().map_err(|e| Error::io(out_dir, e))?;

    write_run_meta(
        out_dir,
        "annotate",
        &[marks_path, manifest_path],
        &[
            "manifest.csv",
            "reaction_stats.json",
            "reaction_cdf.csv",
            "skipped.csv",
        ],
        serde_json::json!({ "respect_existing": respect_existing }),
    )?;
    Ok(AnnotateSummary {
        updated,
        kept_existing,
        skipped,
        unknown,
        stats,
    })
}
