//! Video-level ranking metrics.

use serde::{Deserialize, Serialize};

use crate::data::ScoreTrace;
use crate::error::{Error, Result};

/// How a score trace collapses to one video score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Max,
    Last,
}

impl std::str::FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "max" => Ok(Self::Max),
            "last" => Ok(Self::Last),
            other => Err(format!(
                "unknown aggregation `{other}` (expected max or last)"
            )),
        }
    }
}

impl std::fmt::Display for Aggregation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Max => "max",
            Self::Last => "last",
        })
    }
}

pub fn video_score(trace: &ScoreTrace, aggregation: Aggregation) -> f64 {
    match aggregation {
        Aggregation::Max => trace.scores().fold(f64::NEG_INFINITY, f64::max),
        Aggregation::Last => trace
            .samples()
            .last()
            .map(|&(_, p)| p)
            .expect("traces are non-empty"),
    }
}

fn check_scored(scored: &[(f64, bool)], what: &'static str) -> Result<usize> {
    if let Some(&(s, _)) = scored.iter().find(|(s, _)| !s.is_finite()) {
        return Err(Error::NonFinite(format!("{what} score {s}")));
    }
    let positives = scored.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == scored.len() {
        return Err(Error::SingleClass(what));
    }
    Ok(positives)
}

/// Groups of equal scores in descending order, as (group size, positives).
fn tie_groups(scored: &[(f64, bool)]) -> Vec<(usize, usize)> {
    let mut sorted: Vec<(f64, bool)> = scored.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut prev: Option<f64> = None;
    for (s, y) in sorted {
        if prev == Some(s) {
            let g = groups.last_mut().expect("group open");
            g.0 += 1;
            g.1 += y as usize;
        } else {
            groups.push((1, y as usize));
        }
        prev = Some(s);
    }
    groups
}

/// Mean over positives of the precision at each positive's rank.
///
/// A block of tied scores contributes the expectation over all orderings of
/// the block: slot `r` of a block with `n` items and `k` positives, following
/// `nb` items of which `pb` are positive, holds a positive with probability
/// `k/n`, and then has on average `(r-1)(k-1)/(n-1)` positives ahead of it
/// inside the block.
pub fn average_precision(scored: &[(f64, bool)]) -> Result<f64> {
    let total_pos = check_scored(scored, "average precision")?;
    let mut before = 0usize;
    let mut pos_before = 0usize;
    let mut sum = 0.0;
    for (n, k) in tie_groups(scored) {
        if k > 0 {
            let share = k as f64 / n as f64;
            let slope = if n > 1 {
                (k - 1) as f64 / (n - 1) as f64
            } else {
                0.0
            };
            for r in 1..=n {
                let hits = pos_before as f64 + 1.0 + (r - 1) as f64 * slope;
                sum += share * hits / (before + r) as f64;
            }
        }
        before += n;
        pos_before += k;
    }
    Ok(sum / total_pos as f64)
}

/// Mann–Whitney AUC via midranks; ties count one half.
pub fn roc_auc(scored: &[(f64, bool)]) -> Result<f64> {
    let n_pos = check_scored(scored, "ROC AUC")?;
    let n_neg = scored.len() - n_pos;
    let mut sorted: Vec<(f64, bool)> = scored.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1].0 == sorted[i].0 {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let pos = sorted[i..=j].iter().filter(|(_, y)| *y).count();
        rank_sum += midrank * pos as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Precision and recall of `score >= threshold`. Precision is `None` when
/// nothing is predicted positive.
pub fn precision_recall_at(scored: &[(f64, bool)], threshold: f64) -> Result<(Option<f64>, f64)> {
    let positives = check_scored(scored, "precision/recall")?;
    let (mut tp, mut fp) = (0usize, 0usize);
    for &(s, y) in scored {
        if s >= threshold {
            if y {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    let precision = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
    Ok((precision, tp as f64 / positives as f64))
}
