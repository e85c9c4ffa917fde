use std::path::Path;

use rayon::prelude::*;

use super::{ensure_dir, require_file, write_run_meta};
use crate::data::{load_detections, write_traces, ScoreTrace};
use crate::error::Result;
use crate::fcw::{fcw_score_trace, FcwConfig};

/// Scores every video in a detection file; writes `scores.csv`.
pub fn cmd_fcw(detections: &Path, out_dir: &Path, config: &FcwConfig) -> Result<Vec<ScoreTrace>> {
    require_file(detections)?;
    config.validate()?;
    ensure_dir(out_dir)?;
    let traces = load_detections(detections)?;
    let scores: Vec<ScoreTrace> = traces
        .par_iter()
        .map(|t| fcw_score_trace(t, config))
        .collect::<Result<_>>()?;
    write_traces(out_dir.join("scores.csv"), &scores)?;
    write_run_meta(
        out_dir,
        "fcw",
        &[detections],
        &["scores.csv"],
        serde_json::json!({ "fcw": config }),
    )?;
    Ok(scores)
}
