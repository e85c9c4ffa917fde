//! Synthetic corpora with a known danger signal, for exercising the full
//! pipeline without real footage or backbone features.
//!
//! Each ego positive carries a ramp `clamp(1 - (t_event - t) / ramp_s, 0, 1)`
//! along a fixed direction in half of its patches, scaled by a per-video
//! strength `~ U[min_strength, 1]`. The ramp is visible only up to
//! `t_event - gap`, with `gap ~ U[0, max_gap_s]`. Wider label windows put weaker
//! signal levels among the positives, so the trained head fires on fainter
//! videos and video-level recall grows with the window.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{
    write_detections, write_embedding, write_embedding_index, write_manifest, write_marks,
    AnnotatorMark, BoundingBox, DetectionFrame, DetectionTrace, EmbeddingIndexEntry, Outcome,
    SourceDataset, VideoRecord,
};
use crate::error::{Error, Result};
use crate::prep::clip_end_times;
use crate::stats::midpoint_median;
use crate::trainer::derive_seed;

const CATEGORIES: [(&str, f64); 5] = [
    ("vehicle", 0.5),
    ("pedestrian", 0.2),
    ("cyclist", 0.12),
    ("animal", 0.1),
    ("object", 0.08),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub datasets: Vec<SourceDataset>,
    pub ego_positives: usize,
    pub non_ego_positives: usize,
    pub negatives: usize,
    /// Positives whose event falls before the usable horizon.
    pub early_events: usize,
    pub duration_s: f64,
    pub fps: f64,
    pub clip_frames: usize,
    pub patches: usize,
    pub dim: usize,
    pub noise: f64,
    pub signal: f64,
    pub ramp_s: f64,
    pub max_gap_s: f64,
    pub min_strength: f64,
    pub annotators: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            datasets: vec![SourceDataset::Nexar, SourceDataset::Dad],
            ego_positives: 40,
            non_ego_positives: 6,
            negatives: 40,
            early_events: 2,
            duration_s: 8.0,
            fps: 30.0,
            clip_frames: 16,
            patches: 4,
            dim: 16,
            noise: 0.5,
            signal: 3.0,
            ramp_s: 2.5,
            max_gap_s: 2.0,
            min_strength: 0.6,
            annotators: 3,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::invalid("at least one dataset is required"));
        }
        if self.patches == 0 || self.dim == 0 || self.clip_frames == 0 || self.annotators == 0 {
            return Err(Error::invalid(
                "patches, dim, clip_frames and annotators must be >= 1",
            ));
        }
        if !(self.duration_s >= 6.0 && self.fps > 0.0) {
            return Err(Error::invalid("duration_s must be >= 6 and fps > 0"));
        }
        if !(self.ramp_s > 0.0 && self.max_gap_s >= 0.0 && self.noise >= 0.0) {
            return Err(Error::invalid(
                "ramp_s must be > 0; max_gap_s and noise >= 0",
            ));
        }
        if !(0.0..=1.0).contains(&self.min_strength) {
            return Err(Error::invalid("min_strength must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// One clip's features, keyed by video and clip end time.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthClip {
    pub video_id: String,
    pub clip_end_t: f64,
    pub patches: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub records: Vec<VideoRecord>,
    pub marks: Vec<AnnotatorMark>,
    pub detections: Vec<DetectionTrace>,
    pub clips: Vec<SynthClip>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let v: Array1<f64> = (0..dim).map(|_| normal(rng)).collect();
    let n = v.dot(&v).sqrt().max(1e-12);
    v / n
}

fn pick_category(rng: &mut ChaCha8Rng) -> &'static str {
    let mut u: f64 = rng.random();
    for (c, w) in CATEGORIES {
        if u < w {
            return c;
        }
        u -= w;
    }
    CATEGORIES[0].0
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Ego,
    NonEgo,
    Negative,
    Early,
}

impl Kind {
    fn tag(self) -> &'static str {
        match self {
            Kind::Ego => "ego",
            Kind::NonEgo => "nonego",
            Kind::Negative => "neg",
            Kind::Early => "early",
        }
    }
}

/// Generates the corpus; a pure function of the config.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let mut dir_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[config.seed, 0xD1]));
    let danger_dir = unit_vector(config.dim, &mut dir_rng);
    let other_dir = unit_vector(config.dim, &mut dir_rng);
    let signal_patches = config.patches.div_ceil(2);

    let mut records = Vec::new();
    let mut marks = Vec::new();
    let mut detections = Vec::new();
    let mut clips = Vec::new();

    for (di, &ds) in config.datasets.iter().enumerate() {
        let plan = [
            (Kind::Ego, config.ego_positives),
            (Kind::NonEgo, config.non_ego_positives),
            (Kind::Negative, config.negatives),
            (Kind::Early, config.early_events),
        ];
        for (ki, (kind, count)) in plan.into_iter().enumerate() {
            for i in 0..count {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
                    config.seed,
                    di as u64,
                    ki as u64,
                    i as u64,
                ]));
                let video_id = format!("{}_{}_{:03}", ds.as_str().to_lowercase(), kind.tag(), i);
                let dur = config.duration_s;
                let t_event = match kind {
                    Kind::Ego | Kind::NonEgo => Some(rng.random_range(0.55 * dur..0.95 * dur)),
                    Kind::Early => Some(rng.random_range(1.0..1.9)),
                    Kind::Negative => None,
                };
                let gap = rng.random_range(0.0..=config.max_gap_s);
                let strength = rng.random_range(config.min_strength..=1.0);

                let mut t_alert = None;
                if let Some(te) = t_event {
                    let reaction = (1.6 * (0.45 * normal(&mut rng)).exp()).clamp(0.3, te);
                    let centre = te - reaction;
                    let mut own = Vec::new();
                    for a in 0..config.annotators {
                        let t_mark = (centre + 0.1 * normal(&mut rng)).clamp(0.0, te);
                        own.push(t_mark);
                        marks.push(AnnotatorMark {
                            video_id: video_id.clone(),
                            annotator_id: format!("a{a}"),
                            t_mark,
                        });
                    }
                    t_alert = Some(midpoint_median(&own)?);
                }
                let outcome = match kind {
                    Kind::Ego | Kind::Early => Outcome::PositiveEgo,
                    Kind::NonEgo => Outcome::PositiveNonEgo,
                    Kind::Negative => Outcome::Negative,
                };
                let record = VideoRecord {
                    video_id: video_id.clone(),
                    source_dataset: ds,
                    duration_s: dur,
                    fps: config.fps,
                    outcome,
                    t_alert,
                    t_event,
                    category: (kind != Kind::Negative).then(|| pick_category(&mut rng).to_string()),
                    split: None,
                    note: (kind == Kind::NonEgo).then(|| "other vehicles collide".to_string()),
                };
                record.validate()?;

                // A few negatives carry a weak, brief look-alike of the danger signal.
                let decoy = (kind == Kind::Negative && rng.random::<f64>() < 0.25).then(|| {
                    (
                        rng.random_range(1.0..dur - 1.0),
                        0.3 + 0.2 * rng.random::<f64>(),
                    )
                });
                let scene: Array1<f64> = (0..config.dim).map(|_| 0.5 * normal(&mut rng)).collect();
                let danger = |t: f64| -> f64 {
                    match (kind, t_event, decoy) {
                        (Kind::Ego | Kind::Early, Some(te), _) if t <= te - gap => {
                            strength * (1.0 - (te - t) / config.ramp_s).clamp(0.0, 1.0)
                        }
                        (Kind::Negative, _, Some((c, h))) if (t - c).abs() <= 0.5 => h,
                        _ => 0.0,
                    }
                };
                for t in clip_end_times(&record, config.clip_frames) {
                    let d = danger(t);
                    let other = match (kind, t_event) {
                        (Kind::NonEgo, Some(te)) if t <= te => {
                            (1.0 - (te - t) / config.ramp_s).clamp(0.0, 1.0)
                        }
                        _ => 0.0,
                    };
                    let mut x = Array2::from_shape_fn((config.patches, config.dim), |(_, j)| {
                        scene[j] + config.noise * normal(&mut rng)
                    });
                    for mut row in x.rows_mut().into_iter().take(signal_patches) {
                        row.scaled_add(config.signal * d, &danger_dir);
                        row.scaled_add(config.signal * other, &other_dir);
                    }
                    clips.push(SynthClip {
                        video_id: video_id.clone(),
                        clip_end_t: t,
                        patches: x,
                    });
                }

                detections.push(synth_detections(&record, gap, &mut rng));
                records.push(record);
            }
        }
    }
    Ok(SynthCorpus {
        config: config.clone(),
        records,
        marks,
        detections,
        clips,
    })
}

fn lead_box(distance_m: f64, centre_x: f64, class: &str) -> BoundingBox {
    let y1 = (0.5 + 1.3 / distance_m).min(1.0);
    let half = (0.02 + 1.5 / distance_m).min(0.2);
    BoundingBox {
        class: class.into(),
        x0: (centre_x - half).max(0.0),
        y0: (y1 - 2.0 * half).max(0.0),
        x1: (centre_x + half).min(1.0),
        y1,
    }
}

/// 10 Hz frames with a lead object in lane. Ego positives close in on it as
/// the event nears; others keep it far or out of lane.
fn synth_detections(record: &VideoRecord, gap: f64, rng: &mut ChaCha8Rng) -> DetectionTrace {
    let n = (record.duration_s * 10.0).floor() as usize;
    let cruise = rng.random_range(20.0..45.0);
    let drift = 0.02 * normal(rng);
    let frames = (0..n)
        .map(|k| {
            let t = k as f64 / 10.0;
            let mut boxes = Vec::new();
            match (record.outcome, record.t_event) {
                (Outcome::PositiveEgo, Some(te)) => {
                    let closing = (te - gap * 0.5 - t).max(0.0);
                    let d = (3.0 + 8.0 * closing).min(cruise);
                    boxes.push(lead_box(d, 0.5 + drift, "car"));
                }
                (Outcome::PositiveNonEgo, Some(te)) => {
                    let d = (3.0 + 8.0 * (te - t).max(0.0)).min(cruise);
                    boxes.push(lead_box(d, 0.12, "car"));
                    boxes.push(lead_box(cruise, 0.5 + drift, "truck"));
                }
                _ => boxes.push(lead_box(cruise, 0.5 + drift, "car")),
            }
            if k % 7 == 0 {
                boxes.push(lead_box(4.0, 0.9, "person"));
            }
            DetectionFrame { t, boxes }
        })
        .collect();
    DetectionTrace {
        video_id: record.video_id.clone(),
        frames,
        lane_polygon: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthPaths {
    pub manifest: PathBuf,
    pub marks: PathBuf,
    pub detections: PathBuf,
    pub embedding_index: PathBuf,
}

/// Writes `manifest.csv`, `marks.csv`, `detections.jsonl`, and
/// `embeddings/index.csv` with one `EMB1` file per clip.
pub fn write_corpus(dir: &Path, corpus: &SynthCorpus) -> Result<SynthPaths> {
    let emb_dir = dir.join("embeddings");
    std::fs::create_dir_all(&emb_dir).map_err(|e| Error::io(&emb_dir, e))?;
    let paths = SynthPaths {
        manifest: dir.join("manifest.csv"),
        marks: dir.join("marks.csv"),
        detections: dir.join("detections.jsonl"),
        embedding_index: emb_dir.join("index.csv"),
    };
    write_manifest(&paths.manifest, &corpus.records)?;
    write_marks(&paths.marks, &corpus.marks)?;
    write_detections(&paths.detections, &corpus.detections)?;

    let mut entries = Vec::with_capacity(corpus.clips.len());
    let mut counter: Option<(&str, usize)> = None;
    for clip in &corpus.clips {
        let k = match counter {
            Some((id, k)) if id == clip.video_id => k + 1,
            _ => 0,
        };
        counter = Some((&clip.video_id, k));
        let path = emb_dir.join(format!("{}_{k:04}.emb", clip.video_id));
        write_embedding(&path, &clip.patches)?;
        entries.push(EmbeddingIndexEntry {
            video_id: clip.video_id.clone(),
            clip_end_t: clip.clip_end_t,
            path,
        });
    }
    write_embedding_index(&paths.embedding_index, &entries, &emb_dir)?;
    Ok(paths)
}
