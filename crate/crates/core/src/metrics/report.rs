//! Per-(method, dataset) evaluation reports and their file forms.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ranking::{average_precision, precision_recall_at, roc_auc, video_score, Aggregation};
use super::temporal::{mtta, recall_by_category, tta_distribution, PositiveTrace, TtaDistribution};
use crate::data::{ScoreTrace, VideoRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub aggregation: Aggregation,
    /// Alert threshold for mTTA, detection rate, precision and recall.
    pub threshold: f64,
    /// Threshold for the TTA distribution.
    pub confidence: f64,
    /// Threshold for per-category recall.
    pub category_threshold: f64,
    pub reference_category: String,
    /// Score positives only on samples at or before their event.
    pub truncate_at_event: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            aggregation: Aggregation::Max,
            threshold: 0.5,
            confidence: 0.8,
            category_threshold: 0.85,
            reference_category: "vehicle".into(),
            truncate_at_event: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_videos: usize,
    pub n_positive: usize,
    pub ap: f64,
    pub auc: f64,
    pub mtta_s: Option<f64>,
    pub detection_rate: f64,
    pub precision: Option<f64>,
    pub recall: f64,
    pub threshold: f64,
    pub tta_distribution: Option<TtaDistribution>,
    pub per_category_recall: BTreeMap<String, f64>,
    pub relative_category_recall: Option<BTreeMap<String, f64>>,
}

/// Pairs each labeled record with its trace; unlabeled (non-ego) records are
/// skipped. Missing traces are reported together.
pub fn match_traces<'a>(
    traces: &'a [ScoreTrace],
    records: &'a [VideoRecord],
) -> Result<Vec<(&'a VideoRecord, &'a ScoreTrace, bool)>> {
    let by_id: HashMap<&str, &ScoreTrace> = traces.iter().map(|t| (t.video_id(), t)).collect();
    let mut missing = Vec::new();
    let mut out = Vec::new();
    for r in records {
        let Some(label) = r.ego_label() else { continue };
        match by_id.get(r.video_id.as_str()) {
            Some(t) => out.push((r, *t, label)),
            None => missing.push(r.video_id.as_str()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "missing score traces for: {}",
            missing.join(", ")
        )));
    }
    Ok(out)
}

fn scored_video(record: &VideoRecord, trace: &ScoreTrace, opts: &EvalOptions) -> f64 {
    match (opts.truncate_at_event, record.t_event) {
        (true, Some(te)) => {
            let kept: Vec<(f64, f64)> = trace
                .samples()
                .iter()
                .copied()
                .filter(|&(t, _)| t <= te)
                .collect();
            match ScoreTrace::new(trace.video_id(), kept) {
                Ok(t) => video_score(&t, opts.aggregation),
                Err(_) => 0.0,
            }
        }
        _ => video_score(trace, opts.aggregation),
    }
}

/// Video-level AP/AUC plus temporal metrics for one method on one video set.
pub fn evaluate(
    traces: &[ScoreTrace],
    records: &[VideoRecord],
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let matched = match_traces(traces, records)?;
    let scored: Vec<(f64, bool)> = matched
        .iter()
        .map(|(r, t, y)| (scored_video(r, t, opts), *y))
        .collect();
    let positives: Vec<PositiveTrace> = matched
        .iter()
        .filter(|(_, _, y)| *y)
        .map(|(r, t, _)| PositiveTrace {
            trace: t,
            t_event: r.t_event.expect("positives carry an event time"),
            category: r.category.as_deref(),
        })
        .collect();

    let ap = average_precision(&scored)?;
    let auc = roc_auc(&scored)?;
    let (precision, recall) = precision_recall_at(&scored, opts.threshold)?;
    let timing = mtta(&positives, opts.threshold)?;
    let categories = recall_by_category(
        &positives,
        opts.category_threshold,
        &opts.reference_category,
    )?;
    Ok(EvalReport {
        n_videos: scored.len(),
        n_positive: positives.len(),
        ap,
        auc,
        mtta_s: timing.mtta_s,
        detection_rate: timing.detection_rate,
        precision,
        recall,
        threshold: opts.threshold,
        tta_distribution: tta_distribution(&positives, opts.confidence)?,
        per_category_recall: categories.recall,
        relative_category_recall: categories.relative,
    })
}

/// One flat table row per (method, dataset).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    pub dataset: String,
    pub n_videos: usize,
    pub n_positive: usize,
    pub ap: f64,
    pub auc: f64,
    pub mtta_s: Option<f64>,
    pub detection_rate: f64,
    pub precision: Option<f64>,
    pub recall: f64,
    pub threshold: f64,
}

impl EvalRow {
    pub fn new(method: impl Into<String>, dataset: impl Into<String>, r: &EvalReport) -> Self {
        Self {
            method: method.into(),
            dataset: dataset.into(),
            n_videos: r.n_videos,
            n_positive: r.n_positive,
            ap: r.ap,
            auc: r.auc,
            mtta_s: r.mtta_s,
            detection_rate: r.detection_rate,
            precision: r.precision,
            recall: r.recall,
            threshold: r.threshold,
        }
    }
}

pub fn write_eval_table(path: impl AsRef<Path>, rows: &[EvalRow]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_eval_table_to(file, rows)
}

pub fn write_eval_table_to(writer: impl Write, rows: &[EvalRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    for r in rows {
        csv.serialize(r)?;
    }
    if rows.is_empty() {
        csv.write_record([
            "method",
            "dataset",
            "n_videos",
            "n_positive",
            "ap",
            "auc",
            "mtta_s",
            "detection_rate",
            "precision",
            "recall",
            "threshold",
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<eval table>", e))
}

pub fn read_eval_table(reader: impl std::io::Read) -> Result<Vec<EvalRow>> {
    let mut csv = csv::Reader::from_reader(reader);
    csv.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Long-form `method,tta_s` rows for box plots.
pub fn write_tta_long_to(writer: impl Write, rows: &[(String, f64)]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["method", "tta_s"])?;
    for (m, v) in rows {
        csv.write_record([m.as_str(), &v.to_string()])?;
    }
    csv.flush().map_err(|e| Error::io("<tta table>", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Outcome, SourceDataset};

    fn rec(id: &str, outcome: Outcome, t_event: Option<f64>, cat: Option<&str>) -> VideoRecord {
        VideoRecord {
            video_id: id.into(),
            source_dataset: SourceDataset::Nexar,
            duration_s: 10.0,
            fps: 10.0,
            outcome,
            t_alert: None,
            t_event,
            category: cat.map(Into::into),
            split: None,
            note: None,
        }
    }

    fn tr(id: &str, s: &[(f64, f64)]) -> ScoreTrace {
        ScoreTrace::new(id, s.to_vec()).unwrap()
    }

    /// Four hand-scored videos:
    /// p1 crosses 0.5 at t=3 (event 5): TTA 2, video score 0.9
    /// p2 crosses 0.5 at t=2 (event 6): TTA 4, video score 0.7
    /// n1 peaks 0.8, n2 peaks 0.2
    /// Ranking 0.9(+) 0.8(-) 0.7(+) 0.2(-): AP = (1 + 2/3)/2 = 5/6, AUC = 3/4.
    fn fixture() -> (Vec<ScoreTrace>, Vec<VideoRecord>) {
        let records = vec![
            rec("p1", Outcome::PositiveEgo, Some(5.0), Some("vehicle")),
            rec("p2", Outcome::PositiveEgo, Some(6.0), Some("pedestrian")),
            rec("n1", Outcome::Negative, None, None),
            rec("n2", Outcome::Negative, None, None),
            rec("x", Outcome::PositiveNonEgo, Some(4.0), None),
        ];
        let traces = vec![
            tr("p1", &[(1.0, 0.1), (3.0, 0.6), (5.0, 0.9), (7.0, 0.99)]),
            tr("p2", &[(1.0, 0.3), (2.0, 0.55), (4.0, 0.7)]),
            tr("n1", &[(1.0, 0.8), (2.0, 0.1)]),
            tr("n2", &[(1.0, 0.2)]),
        ];
        (traces, records)
    }

    #[test]
    fn hand_built_fixture() {
        let (traces, records) = fixture();
        let r = evaluate(&traces, &records, &EvalOptions::default()).unwrap();
        assert_eq!(r.n_videos, 4);
        assert!((r.ap - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(r.auc, 0.75);
        assert_eq!(r.mtta_s, Some(3.0));
        assert_eq!(r.detection_rate, 1.0);
        assert_eq!(r.precision, Some(2.0 / 3.0));
        assert_eq!(r.recall, 1.0);
        let d = r.tta_distribution.unwrap();
        // 0.8 crossings: p1 at t=5 (TTA 0); p2 never
        assert_eq!(d.values, vec![0.0]);
        assert_eq!(r.per_category_recall["vehicle"], 1.0);
        assert_eq!(r.per_category_recall["pedestrian"], 0.0);
    }

    #[test]
    fn identical_methods_identical_rows() {
        let (traces, records) = fixture();
        let a = evaluate(&traces, &records, &EvalOptions::default()).unwrap();
        let b = evaluate(&traces.clone(), &records, &EvalOptions::default()).unwrap();
        assert_eq!(
            EvalRow::new("m", "d", &a).ap,
            EvalRow::new("m2", "d", &b).ap
        );
        assert_eq!(a, b);
    }

    #[test]
    fn missing_trace_is_listed() {
        let (mut traces, records) = fixture();
        traces.retain(|t| t.video_id() != "n2");
        let err = evaluate(&traces, &records, &EvalOptions::default()).unwrap_err();
        assert!(err.to_string().contains("n2"), "{err}");
    }

    #[test]
    fn table_round_trip() {
        let (traces, records) = fixture();
        let r = evaluate(&traces, &records, &EvalOptions::default()).unwrap();
        let rows = vec![EvalRow::new("probe", "Nexar", &r)];
        let mut buf = Vec::new();
        write_eval_table_to(&mut buf, &rows).unwrap();
        assert_eq!(read_eval_table(buf.as_slice()).unwrap(), rows);
    }
}
