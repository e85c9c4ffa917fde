//! Time-to-accident metrics over positive videos.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::ScoreTrace;
use crate::error::{Error, Result};
use crate::stats::{mean, nearest_rank, sorted_copy};

/// A positive video's trace with its event time and optional category.
#[derive(Debug, Clone, Copy)]
pub struct PositiveTrace<'a> {
    pub trace: &'a ScoreTrace,
    pub t_event: f64,
    pub category: Option<&'a str>,
}

/// Earliest sample time with `score >= threshold` and `t <= t_event`.
pub fn first_crossing(trace: &ScoreTrace, threshold: f64, t_event: f64) -> Option<f64> {
    trace
        .samples()
        .iter()
        .take_while(|&&(t, _)| t <= t_event)
        .find(|&&(_, p)| p >= threshold)
        .map(|&(t, _)| t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MttaResult {
    /// Mean TTA over detected videos; absent when none was detected.
    pub mtta_s: Option<f64>,
    pub detection_rate: f64,
    pub n_videos: usize,
    pub n_detected: usize,
    /// TTA of each detected video, in input order.
    pub ttas: Vec<f64>,
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )))
    }
}

pub fn mtta(positives: &[PositiveTrace], threshold: f64) -> Result<MttaResult> {
    check_threshold(threshold)?;
    if positives.is_empty() {
        return Err(Error::invalid("mTTA needs at least one positive video"));
    }
    let ttas: Vec<f64> = positives
        .iter()
        .filter_map(|p| first_crossing(p.trace, threshold, p.t_event).map(|t| p.t_event - t))
        .collect();
    Ok(MttaResult {
        mtta_s: (!ttas.is_empty()).then(|| mean(&ttas)),
        detection_rate: ttas.len() as f64 / positives.len() as f64,
        n_videos: positives.len(),
        n_detected: ttas.len(),
        ttas,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtaDistribution {
    pub confidence: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub p5: f64,
    pub p95: f64,
    pub values: Vec<f64>,
}

impl TtaDistribution {
    /// Nearest-rank summary of TTA values; `None` for an empty list.
    pub fn summarize(confidence: f64, values: Vec<f64>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let sorted = sorted_copy(&values);
        let q = |pct: f64| nearest_rank(&sorted, pct).expect("non-empty");
        Some(Self {
            confidence,
            median: q(50.0),
            q1: q(25.0),
            q3: q(75.0),
            p5: q(5.0),
            p95: q(95.0),
            values,
        })
    }
}

/// TTA summary at a confidence threshold; `None` when nothing crosses it.
pub fn tta_distribution(
    positives: &[PositiveTrace],
    confidence: f64,
) -> Result<Option<TtaDistribution>> {
    let r = mtta(positives, confidence)?;
    Ok(TtaDistribution::summarize(confidence, r.ttas))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRecall {
    pub threshold: f64,
    pub reference: String,
    pub recall: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, usize>,
    /// Recall divided by the reference category's; absent when the reference
    /// is missing or has zero recall.
    pub relative: Option<BTreeMap<String, f64>>,
    pub omitted: usize,
}

/// Per-category share of positives detected before their event.
pub fn recall_by_category(
    positives: &[PositiveTrace],
    threshold: f64,
    reference: &str,
) -> Result<CategoryRecall> {
    check_threshold(threshold)?;
    let mut hits: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut omitted = 0;
    for p in positives {
        let Some(cat) = p.category.map(str::trim).filter(|c| !c.is_empty()) else {
            log::warn!(
                "video `{}` has no category; left out of per-category recall",
                p.trace.video_id()
            );
            omitted += 1;
            continue;
        };
        let e = hits.entry(cat.to_string()).or_default();
        e.1 += 1;
        if first_crossing(p.trace, threshold, p.t_event).is_some() {
            e.0 += 1;
        }
    }
    let recall: BTreeMap<String, f64> = hits
        .iter()
        .map(|(c, &(h, n))| (c.clone(), h as f64 / n as f64))
        .collect();
    let relative = recall
        .get(reference)
        .copied()
        .filter(|&r| r > 0.0)
        .map(|r_ref| recall.iter().map(|(c, r)| (c.clone(), r / r_ref)).collect());
    Ok(CategoryRecall {
        threshold,
        reference: reference.to_string(),
        counts: hits.iter().map(|(c, &(_, n))| (c.clone(), n)).collect(),
        recall,
        relative,
        omitted,
    })
}
