//! Dataset preparation: horizon filtering, synthetic negatives, clip labeling,
//! oversampling and deterministic splits.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Outcome, SourceDataset, Split, VideoRecord};
use crate::error::{Error, Result};

pub const SYNTHETIC_NEGATIVE_SUFFIX: &str = "#synneg";

/// Which annotated time the label window is anchored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LabelAnchor {
    #[default]
    Event,
    Alert,
}

impl std::str::FromStr for LabelAnchor {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "event" => Ok(LabelAnchor::Event),
            "alert" => Ok(LabelAnchor::Alert),
            other => Err(format!("unknown label anchor `{other}` (event|alert)")),
        }
    }
}

/// When to carve synthetic negatives out of positives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticNegatives {
    /// Only for datasets without real negatives.
    #[default]
    Auto,
    Always,
    Never,
}

impl std::str::FromStr for SyntheticNegatives {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(SyntheticNegatives::Auto),
            "always" => Ok(SyntheticNegatives::Always),
            "never" => Ok(SyntheticNegatives::Never),
            other => Err(format!("unknown synthetic-negative mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::invalid(format!(
                "split fractions {parts:?} outside [0, 1]"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "split fractions sum to {sum}, not 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepConfig {
    pub horizon_s: f64,
    pub synth_neg_len_s: f64,
    pub synth_neg_min_alert_s: f64,
    pub label_window_s: f64,
    pub label_anchor: LabelAnchor,
    pub oversample_rate: usize,
    pub clip_frames: usize,
    pub split_seed: u64,
    pub fractions: SplitFractions,
    pub synthetic_negatives: SyntheticNegatives,
}

impl Default for PrepConfig {
    fn default() -> Self {
        Self {
            horizon_s: 2.0,
            synth_neg_len_s: 4.0,
            synth_neg_min_alert_s: 4.5,
            label_window_s: 1.5,
            label_anchor: LabelAnchor::Event,
            oversample_rate: 2,
            clip_frames: 16,
            split_seed: 0,
            fractions: SplitFractions::default(),
            synthetic_negatives: SyntheticNegatives::Auto,
        }
    }
}

impl PrepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon_s >= 0.0) {
            return Err(Error::invalid("horizon must be non-negative"));
        }
        if !(self.synth_neg_len_s > 0.0 && self.synth_neg_len_s < self.synth_neg_min_alert_s) {
            return Err(Error::invalid(
                "synthetic negative length must be positive and below the minimum alert time",
            ));
        }
        if !(self.label_window_s > 0.0) {
            return Err(Error::invalid("label window must be positive"));
        }
        if self.oversample_rate < 1 {
            return Err(Error::invalid("oversample rate must be at least 1"));
        }
        if self.clip_frames < 1 {
            return Err(Error::invalid("clip length must be at least one frame"));
        }
        self.fractions.validate()
    }
}

/// Splits positives whose event comes before `horizon_s` away from the rest.
/// An event exactly at the horizon is kept.
pub fn filter_insufficient_horizon(
    records: &[VideoRecord],
    horizon_s: f64,
) -> (Vec<VideoRecord>, Vec<VideoRecord>) {
    records
        .iter()
        .cloned()
        .partition(|r| !(r.outcome.is_positive() && r.t_event.is_some_and(|t| t < horizon_s)))
}

/// The first `synth_neg_len_s` seconds of a positive whose alert is at or after
/// `synth_neg_min_alert_s`, as a new synthetic-negative record.
pub fn carve_synthetic_negative(
    record: &VideoRecord,
    config: &PrepConfig,
) -> Result<Option<VideoRecord>> {
    if !record.outcome.is_positive() {
        return Err(Error::invariant(
            &record.video_id,
            "synthetic negatives are carved from positives only",
        ));
    }
    let alert = record
        .t_alert
        .ok_or_else(|| Error::invariant(&record.video_id, "no alert time to carve against"))?;
    if alert < config.synth_neg_min_alert_s {
        return Ok(None);
    }
    let carved = VideoRecord {
        video_id: format!("{}{SYNTHETIC_NEGATIVE_SUFFIX}", record.video_id),
        source_dataset: record.source_dataset,
        duration_s: config.synth_neg_len_s,
        fps: record.fps,
        outcome: Outcome::SyntheticNegative,
        t_alert: None,
        t_event: None,
        category: None,
        split: record.split,
        note: None,
    };
    carved.validate()?;
    Ok(Some(carved))
}

/// Binary labels for clips ending at `clip_end_times`: positive iff the clip
/// end lies in `[anchor - window, anchor]` and not after the event.
pub fn label_clips(
    record: &VideoRecord,
    clip_end_times: &[f64],
    label_window_s: f64,
    anchor: LabelAnchor,
) -> Result<Vec<bool>> {
    for &t in clip_end_times {
        if !(0.0..=record.duration_s + 1e-9).contains(&t) {
            return Err(Error::invariant(
                &record.video_id,
                format!("clip end {t} outside [0, {}]", record.duration_s),
            ));
        }
    }
    if !record.outcome.is_positive() {
        return Ok(vec![false; clip_end_times.len()]);
    }
    let event = record
        .t_event
        .ok_or_else(|| Error::invariant(&record.video_id, "positive without event time"))?;
    let anchor_t = match anchor {
        LabelAnchor::Event => event,
        LabelAnchor::Alert => record.t_alert.ok_or_else(|| {
            Error::invariant(&record.video_id, "alert-anchored labels need t_alert")
        })?,
    };
    Ok(clip_end_times
        .iter()
        .map(|&t| t <= event && anchor_t - label_window_s <= t && t <= anchor_t)
        .collect())
}

/// Clip end times for `clip_frames`-frame windows with half-overlap stride.
pub fn clip_end_times(record: &VideoRecord, clip_frames: usize) -> Vec<f64> {
    let total = (record.duration_s * record.fps + 1e-9).floor() as usize;
    let stride = (clip_frames / 2).max(1);
    (clip_frames..=total)
        .step_by(stride)
        .map(|end| end as f64 / record.fps)
        .collect()
}

/// Originals in order, then `rate - 1` rounds of the positives in order.
pub fn oversample<T: Clone>(items: &[T], is_positive: impl Fn(&T) -> bool, rate: usize) -> Vec<T> {
    let mut out = items.to_vec();
    for _ in 1..rate {
        out.extend(items.iter().filter(|it| is_positive(it)).cloned());
    }
    out
}

fn split_rank(video_id: &str, seed: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(video_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Stratified by outcome: within each stratum, records ordered by a seeded hash
/// of their id take train, then val, then test slots sized by rounding.
pub fn make_splits(
    records: &[VideoRecord],
    fractions: SplitFractions,
    seed: u64,
    respect_existing: bool,
) -> Result<Vec<VideoRecord>> {
    fractions.validate()?;
    let mut out = records.to_vec();
    let mut strata: BTreeMap<Outcome, Vec<usize>> = BTreeMap::new();
    for (i, r) in out.iter().enumerate() {
        if respect_existing && r.split.is_some() {
            continue;
        }
        strata.entry(r.outcome).or_default().push(i);
    }
    for (_, mut idx) in strata {
        idx.sort_by_key(|&i| (split_rank(&out[i].video_id, seed), out[i].video_id.clone()));
        let n = idx.len();
        let n_train = (((n as f64) * fractions.train).round() as usize).min(n);
        let n_val = (((n as f64) * fractions.val).round() as usize).min(n - n_train);
        for (k, &i) in idx.iter().enumerate() {
            out[i].split = Some(if k < n_train {
                Split::Train
            } else if k < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionRow {
    pub dataset: String,
    pub real_negative: usize,
    pub real_positive: usize,
    pub synthetic_negative: usize,
    pub total: usize,
}

#[derive(Debug, Clone)]
pub struct Composition {
    /// Records retained for ego-centric evaluation, synthetic negatives appended
    /// after their dataset's originals.
    pub records: Vec<VideoRecord>,
    pub removed_horizon: Vec<VideoRecord>,
    pub removed_non_ego: Vec<VideoRecord>,
    pub rows: Vec<CompositionRow>,
}

/// Ego-centric composition: drop short-horizon and non-ego positives, then carve
/// synthetic negatives from ego positives according to `config.synthetic_negatives`.
pub fn compose(records: &[VideoRecord], config: &PrepConfig) -> Result<Composition> {
    config.validate()?;
    let (kept, removed_horizon) = filter_insufficient_horizon(records, config.horizon_s);
    let (removed_non_ego, kept): (Vec<_>, Vec<_>) = kept
        .into_iter()
        .partition(|r| r.outcome == Outcome::PositiveNonEgo);

    let datasets: BTreeSet<SourceDataset> = kept.iter().map(|r| r.source_dataset).collect();
    let mut out = Vec::with_capacity(kept.len());
    let mut rows = Vec::new();
    for ds in datasets {
        let originals: Vec<&VideoRecord> = kept.iter().filter(|r| r.source_dataset == ds).collect();
        let real_negative = originals
            .iter()
            .filter(|r| r.outcome == Outcome::Negative)
            .count();
        let carve = match config.synthetic_negatives {
            SyntheticNegatives::Always => true,
            SyntheticNegatives::Never => false,
            SyntheticNegatives::Auto => real_negative == 0,
        };
        let mut synthetic = Vec::new();
        if carve {
            for r in originals
                .iter()
                .filter(|r| r.outcome == Outcome::PositiveEgo)
            {
                if r.t_alert.is_some() {
                    if let Some(neg) = carve_synthetic_negative(r, config)? {
                        synthetic.push(neg);
                    }
                }
            }
        }
        let real_positive = originals
            .iter()
            .filter(|r| r.outcome == Outcome::PositiveEgo)
            .count();
        let already_synthetic = originals
            .iter()
            .filter(|r| r.outcome == Outcome::SyntheticNegative)
            .count();
        rows.push(CompositionRow {
            dataset: ds.to_string(),
            real_negative,
            real_positive,
            synthetic_negative: synthetic.len() + already_synthetic,
            total: originals.len() + synthetic.len(),
        });
        out.extend(originals.into_iter().cloned());
        out.extend(synthetic);
    }
    Ok(Composition {
        records: out,
        removed_horizon,
        removed_non_ego,
        rows,
    })
}
