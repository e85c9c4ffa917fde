use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceDataset {
    #[serde(rename = "DAD")]
    Dad,
    #[serde(rename = "DADA2000")]
    Dada2000,
    #[serde(rename = "DoTA")]
    Dota,
    #[serde(rename = "Nexar")]
    Nexar,
    #[serde(rename = "custom")]
    Custom,
}

impl SourceDataset {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceDataset::Dad => "DAD",
            SourceDataset::Dada2000 => "DADA2000",
            SourceDataset::Dota => "DoTA",
            SourceDataset::Nexar => "Nexar",
            SourceDataset::Custom => "custom",
        }
    }
}

impl FromStr for SourceDataset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "DAD" => Ok(SourceDataset::Dad),
            "DADA2000" | "DADA-2000" | "DADA" => Ok(SourceDataset::Dada2000),
            "DoTA" => Ok(SourceDataset::Dota),
            "Nexar" => Ok(SourceDataset::Nexar),
            "custom" => Ok(SourceDataset::Custom),
            other => Err(format!("unknown source dataset `{other}`")),
        }
    }
}

impl fmt::Display for SourceDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    PositiveEgo,
    PositiveNonEgo,
    Negative,
    SyntheticNegative,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::PositiveEgo => "positive_ego",
            Outcome::PositiveNonEgo => "positive_non_ego",
            Outcome::Negative => "negative",
            Outcome::SyntheticNegative => "synthetic_negative",
        }
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Outcome::PositiveEgo | Outcome::PositiveNonEgo)
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "positive_ego" => Ok(Outcome::PositiveEgo),
            "positive_non_ego" => Ok(Outcome::PositiveNonEgo),
            "negative" => Ok(Outcome::Negative),
            "synthetic_negative" => Ok(Outcome::SyntheticNegative),
            other => Err(format!("unknown outcome `{other}`")),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One annotated video.
///
/// Near-misses are stored as `PositiveEgo` with `t_event` at the completion of
/// the avoidance maneuver; `note` may say so but nothing else distinguishes them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub source_dataset: SourceDataset,
    pub duration_s: f64,
    pub fps: f64,
    pub outcome: Outcome,
    pub t_alert: Option<f64>,
    pub t_event: Option<f64>,
    pub category: Option<String>,
    /// `None` until a split has been assigned.
    pub split: Option<Split>,
    pub note: Option<String>,
}

impl VideoRecord {
    /// Checks the record-level invariants, naming the violated rule.
    pub fn validate(&self) -> Result<()> {
        let id = self.video_id.as_str();
        if id.is_empty() {
            return Err(Error::invariant(id, "empty video_id"));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::invariant(id, "duration must be positive"));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::invariant(id, "fps must be positive"));
        }
        for (name, t) in [("t_alert", self.t_alert), ("t_event", self.t_event)] {
            if let Some(t) = t {
                if !t.is_finite() {
                    return Err(Error::invariant(id, format!("{name} is not finite")));
                }
            }
        }
        if self.outcome.is_positive() {
            match self.t_event {
                None => return Err(Error::invariant(id, "positive without event time")),
                Some(t) if t <= 0.0 => {
                    return Err(Error::invariant(id, "event time must be positive"))
                }
                Some(t) if t > self.duration_s => {
                    return Err(Error::invariant(id, "event after end of video"))
                }
                _ => {}
            }
        } else if self.t_event.is_some() {
            return Err(Error::invariant(id, "negative with event time"));
        }
        if let Some(alert) = self.t_alert {
            if alert < 0.0 {
                return Err(Error::invariant(id, "alert time is negative"));
            }
            if let Some(event) = self.t_event {
                if alert > event {
                    return Err(Error::invariant(id, "alert after event"));
                }
            }
            if alert > self.duration_s {
                return Err(Error::invariant(id, "alert after end of video"));
            }
        }
        Ok(())
    }

    /// Reaction interval `t_event - t_alert`, when both are known.
    pub fn reaction_s(&self) -> Option<f64> {
        Some(self.t_event? - self.t_alert?)
    }

    /// Binary label for ego-centric evaluation. Non-ego positives have no label.
    pub fn ego_label(&self) -> Option<bool> {
        match self.outcome {
            Outcome::PositiveEgo => Some(true),
            Outcome::Negative | Outcome::SyntheticNegative => Some(false),
            Outcome::PositiveNonEgo => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorMark {
    pub video_id: String,
    pub annotator_id: String,
    pub t_mark: f64,
}

/// Time-stamped collision probabilities for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTrace {
    video_id: String,
    samples: Vec<(f64, f64)>,
}

impl ScoreTrace {
    pub fn new(video_id: impl Into<String>, samples: Vec<(f64, f64)>) -> Result<Self> {
        let video_id = video_id.into();
        if samples.is_empty() {
            return Err(Error::invariant(&video_id, "empty score trace"));
        }
        for (i, &(t, p)) in samples.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::invariant(&video_id, "non-finite sample time"));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invariant(
                    &video_id,
                    format!("score {p} at t={t} outside [0, 1]"),
                ));
            }
            if i > 0 && t <= samples[i - 1].0 {
                return Err(Error::invariant(
                    &video_id,
                    format!("sample times not strictly increasing at t={t}"),
                ));
            }
        }
        Ok(Self { video_id, samples })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|&(_, p)| p)
    }
}

/// Backbone features for one clip: `patches` is P×D, one row per latent patch.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingClip {
    pub video_id: String,
    pub clip_end_t: f64,
    pub patches: Array2<f64>,
    pub label: bool,
}

impl EmbeddingClip {
    pub fn new(
        video_id: impl Into<String>,
        clip_end_t: f64,
        patches: Array2<f64>,
        label: bool,
    ) -> Result<Self> {
        let video_id = video_id.into();
        if patches.nrows() == 0 || patches.ncols() == 0 {
            return Err(Error::Shape(format!(
                "clip {video_id}@{clip_end_t}: empty patch matrix"
            )));
        }
        if patches.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("clip {video_id}@{clip_end_t}")));
        }
        Ok(Self {
            video_id,
            clip_end_t,
            patches,
            label,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub class: String,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BoundingBox {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.x0, self.y0, self.x1, self.y1]
            .iter()
            .all(|v| v.is_finite())
            && 0.0 <= self.x0
            && self.x0 < self.x1
            && self.x1 <= 1.0
            && 0.0 <= self.y0
            && self.y0 < self.y1
            && self.y1 <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "degenerate box {} ({}, {}, {}, {})",
                self.class, self.x0, self.y0, self.x1, self.y1
            )))
        }
    }

    pub fn bottom_center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), self.y1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFrame {
    pub t: f64,
    pub boxes: Vec<BoundingBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionTrace {
    pub video_id: String,
    pub frames: Vec<DetectionFrame>,
    pub lane_polygon: Option<Vec<(f64, f64)>>,
}

impl DetectionTrace {
    pub fn validate(&self) -> Result<()> {
        for (i, frame) in self.frames.iter().enumerate() {
            if !frame.t.is_finite() || (i > 0 && frame.t <= self.frames[i - 1].t) {
                return Err(Error::invariant(
                    &self.video_id,
                    format!("frame times not increasing at t={}", frame.t),
                ));
            }
            for b in &frame.boxes {
                b.validate()
                    .map_err(|e| Error::invariant(&self.video_id, e.to_string()))?;
            }
        }
        if let Some(poly) = &self.lane_polygon {
            if poly.len() < 3 {
                return Err(Error::invariant(
                    &self.video_id,
                    "lane polygon needs 3 points",
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn positive() -> VideoRecord {
        VideoRecord {
            video_id: "v1".into(),
            source_dataset: SourceDataset::Nexar,
            duration_s: 40.0,
            fps: 30.0,
            outcome: Outcome::PositiveEgo,
            t_alert: Some(19.2),
            t_event: Some(21.0),
            category: Some("vehicle".into()),
            split: Some(Split::Test),
            note: None,
        }
    }

    #[test]
    fn record_rules() {
        assert!(positive().validate().is_ok());

        let mut r = positive();
        r.t_event = None;
        assert!(r
            .validate()
            .unwrap_err()
            .to_string()
            .contains("positive without event"));

        let mut r = positive();
        r.t_event = Some(41.0);
        r.t_alert = None;
        assert!(r
            .validate()
            .unwrap_err()
            .to_string()
            .contains("event after end"));

        let mut r = positive();
        r.outcome = Outcome::SyntheticNegative;
        assert!(r
            .validate()
            .unwrap_err()
            .to_string()
            .contains("negative with event time"));

        let mut r = positive();
        r.fps = 0.0;
        assert!(r.validate().is_err());
    }

    #[test]
    fn trace_rejects_unordered_times() {
        assert!(ScoreTrace::new("v", vec![(0.0, 0.1), (0.0, 0.2)]).is_err());
        assert!(ScoreTrace::new("v", vec![(0.0, 1.2)]).is_err());
        assert!(ScoreTrace::new("v", vec![]).is_err());
        assert!(ScoreTrace::new("v", vec![(0.0, 0.0), (0.5, 1.0)]).is_ok());
    }

    #[test]
    fn box_validation() {
        let b = BoundingBox {
            class: "car".into(),
            x0: 0.4,
            y0: 0.6,
            x1: 0.4,
            y1: 0.9,
        };
        assert!(b.validate().is_err());
    }
}
