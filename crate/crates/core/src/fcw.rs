//! Rule-based forward collision warning from per-frame detections.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::{BoundingBox, DetectionTrace, ScoreTrace};
use crate::error::{Error, Result};

/// Normalized image row of the horizon.
pub const HORIZON_Y: f64 = 0.5;

/// Central trapezoid: 40% of the width at the bottom edge, 10% at the horizon.
pub fn default_lane_polygon() -> Vec<(f64, f64)> {
    vec![(0.3, 1.0), (0.7, 1.0), (0.55, HORIZON_Y), (0.45, HORIZON_Y)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcwConfig {
    pub distance_threshold_m: f64,
    pub camera_height_m: f64,
    pub focal_ratio: f64,
    pub relevant_classes: BTreeSet<String>,
    pub smoothing_window: usize,
    /// Used for traces that carry no polygon of their own.
    pub lane_polygon: Vec<(f64, f64)>,
}

impl Default for FcwConfig {
    fn default() -> Self {
        Self {
            distance_threshold_m: 15.0,
            camera_height_m: 1.3,
            focal_ratio: 1.0,
            relevant_classes: ["car", "truck", "bus", "motorcycle"]
                .into_iter()
                .map(String::from)
                .collect(),
            smoothing_window: 3,
            lane_polygon: default_lane_polygon(),
        }
    }
}

impl FcwConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance_threshold_m > 0.0) {
            return Err(Error::invalid("distance_threshold_m must be > 0"));
        }
        if !(self.camera_height_m > 0.0 && self.focal_ratio > 0.0) {
            return Err(Error::invalid(
                "camera_height_m and focal_ratio must be > 0",
            ));
        }
        if self.smoothing_window == 0 {
            return Err(Error::invalid("smoothing_window must be at least 1"));
        }
        if self.lane_polygon.len() < 3 {
            return Err(Error::invalid("lane polygon needs at least 3 points"));
        }
        Ok(())
    }
}

/// Flat-ground pinhole range from the box's bottom edge; `+inf` at or above
/// the horizon.
pub fn estimate_distance(b: &BoundingBox, config: &FcwConfig) -> Result<f64> {
    b.validate()?;
    let below = b.y1 - HORIZON_Y;
    if below <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(config.focal_ratio * config.camera_height_m / below)
}

fn on_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> bool {
    let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
    let scale = (b.0 - a.0).abs() + (b.1 - a.1).abs();
    cross.abs() <= 1e-12 * scale.max(1.0)
        && p.0 >= a.0.min(b.0) - 1e-12
        && p.0 <= a.0.max(b.0) + 1e-12
        && p.1 >= a.1.min(b.1) - 1e-12
        && p.1 <= a.1.max(b.1) + 1e-12
}

/// Even-odd point-in-polygon; points on an edge count as inside.
pub fn point_in_polygon(p: (f64, f64), polygon: &[(f64, f64)]) -> bool {
    let n = polygon.len();
    let mut inside = false;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        if on_segment(p, a, b) {
            return true;
        }
        if (a.1 > p.1) != (b.1 > p.1) {
            let x = a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1);
            if p.0 < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Trailing mean over up to `window` most recent values.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for i in 0..values.len() {
        sum += values[i];
        if i >= window {
            sum -= values[i - window];
        }
        let len = (i + 1).min(window);
        out.push((sum / len as f64).clamp(0.0, 1.0));
    }
    out
}

/// Binary per-frame alert: some relevant in-lane box is closer than the threshold.
pub fn raw_alerts(trace: &DetectionTrace, config: &FcwConfig) -> Result<Vec<f64>> {
    let lane = trace
        .lane_polygon
        .as_deref()
        .unwrap_or(&config.lane_polygon);
    trace
        .frames
        .iter()
        .map(|frame| {
            for b in &frame.boxes {
                if !config.relevant_classes.contains(&b.class) {
                    continue;
                }
                if !point_in_polygon(b.bottom_center(), lane) {
                    continue;
                }
                if estimate_distance(b, config)? < config.distance_threshold_m {
                    return Ok(1.0);
                }
            }
            Ok(0.0)
        })
        .collect()
}

pub fn fcw_score_trace(trace: &DetectionTrace, config: &FcwConfig) -> Result<ScoreTrace> {
    config.validate()?;
    trace.validate()?;
    let alerts = raw_alerts(trace, config)?;
    let scores = moving_average(&alerts, config.smoothing_window);
    let samples = trace.frames.iter().map(|f| f.t).zip(scores).collect();
    ScoreTrace::new(trace.video_id.clone(), samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DetectionFrame;
    use proptest::prelude::*;

    fn car(x0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox {
            class: "car".into(),
            x0,
            y0: (y1 - 0.1).max(0.0),
            x1,
            y1,
        }
    }

    fn trace_of(frames: Vec<Vec<BoundingBox>>) -> DetectionTrace {
        DetectionTrace {
            video_id: "v".into(),
            frames: frames
                .into_iter()
                .enumerate()
                .map(|(i, boxes)| DetectionFrame {
                    t: i as f64 * 0.1,
                    boxes,
                })
                .collect(),
            lane_polygon: None,
        }
    }

    #[test]
    fn distance_examples() {
        let cfg = FcwConfig::default();
        assert!((estimate_distance(&car(0.4, 0.6, 1.0), &cfg).unwrap() - 2.6).abs() < 1e-12);
        assert_eq!(
            estimate_distance(&car(0.4, 0.6, 0.5), &cfg).unwrap(),
            f64::INFINITY
        );
        let near = estimate_distance(&car(0.4, 0.6, 0.9), &cfg).unwrap();
        let far = estimate_distance(&car(0.4, 0.6, 0.7), &cfg).unwrap();
        assert!((far - 2.0 * near).abs() < 1e-12);
        assert!(estimate_distance(&car(0.6, 0.4, 0.9), &cfg).is_err());
    }

    #[test]
    fn polygon_membership() {
        let lane = default_lane_polygon();
        assert!(point_in_polygon((0.5, 0.9), &lane));
        assert!(point_in_polygon((0.3, 1.0), &lane));
        assert!(point_in_polygon((0.5, 1.0), &lane));
        assert!(!point_in_polygon((0.2, 0.9), &lane));
        assert!(!point_in_polygon((0.5, 0.4), &lane));
        assert!(!point_in_polygon(
            (0.46, 0.52),
            &[(0.3, 1.0), (0.7, 1.0), (0.55, 0.5)]
        ));
    }

    #[test]
    fn no_boxes_scores_zero() {
        let t = trace_of(vec![vec![]; 5]);
        let s = fcw_score_trace(&t, &FcwConfig::default()).unwrap();
        assert!(s.scores().all(|p| p == 0.0));
    }

    #[test]
    fn close_car_scores_one() {
        let t = trace_of(vec![vec![car(0.4, 0.6, 1.0)]; 6]);
        let s = fcw_score_trace(&t, &FcwConfig::default()).unwrap();
        assert!(s.scores().all(|p| p == 1.0));
    }

    #[test]
    fn smoothing_example() {
        let s = moving_average(&[0.0, 0.0, 1.0, 1.0, 1.0], 3);
        let expected = [0.0, 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for (a, b) in s.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(moving_average(&[0.0, 1.0, 0.0], 1), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn irrelevant_and_off_lane_ignored() {
        let mut person = car(0.4, 0.6, 1.0);
        person.class = "person".into();
        let t = trace_of(vec![vec![person, car(0.0, 0.1, 1.0)]; 3]);
        let s = fcw_score_trace(&t, &FcwConfig::default()).unwrap();
        assert!(s.scores().all(|p| p == 0.0));
    }

    #[test]
    fn trace_polygon_overrides_default() {
        let mut t = trace_of(vec![vec![car(0.0, 0.1, 1.0)]; 3]);
        t.lane_polygon = Some(vec![(0.0, 0.5), (0.2, 0.5), (0.2, 1.0), (0.0, 1.0)]);
        let s = fcw_score_trace(&t, &FcwConfig::default()).unwrap();
        assert!(s.scores().all(|p| p == 1.0));
    }

    fn frames() -> impl Strategy<Value = Vec<Vec<BoundingBox>>> {
        let bx =
            (0.0f64..0.8, 0.05f64..0.2, 0.15f64..1.0).prop_map(|(x0, w, y1)| car(x0, x0 + w, y1));
        prop::collection::vec(prop::collection::vec(bx, 0..4), 1..20)
    }

    proptest! {
        #[test]
        fn scores_bounded_and_window_one_is_raw(f in frames()) {
            let t = trace_of(f);
            let cfg = FcwConfig { smoothing_window: 1, ..FcwConfig::default() };
            let raw = raw_alerts(&t, &cfg).unwrap();
            let s: Vec<f64> = fcw_score_trace(&t, &cfg).unwrap().scores().collect();
            prop_assert_eq!(s, raw);
            let smooth = fcw_score_trace(&t, &FcwConfig::default()).unwrap();
            prop_assert!(smooth.scores().all(|p| (0.0..=1.0).contains(&p)));
        }

        #[test]
        fn threshold_monotone(f in frames(), a in 1.0f64..40.0, b in 1.0f64..40.0) {
            let t = trace_of(f);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let s_lo = fcw_score_trace(&t, &FcwConfig { distance_threshold_m: lo, ..FcwConfig::default() }).unwrap();
            let s_hi = fcw_score_trace(&t, &FcwConfig { distance_threshold_m: hi, ..FcwConfig::default() }).unwrap();
            for (x, y) in s_lo.scores().zip(s_hi.scores()) {
                prop_assert!(y >= x);
            }
        }

        #[test]
        fn off_lane_box_removal(f in frames()) {
            let lane = default_lane_polygon();
            let t = trace_of(f.clone());
            let pruned = trace_of(
                f.into_iter()
                    .map(|boxes| boxes.into_iter().filter(|b| point_in_polygon(b.bottom_center(), &lane)).collect())
                    .collect(),
            );
            let cfg = FcwConfig::default();
            prop_assert_eq!(fcw_score_trace(&t, &cfg).unwrap(), fcw_score_trace(&pruned, &cfg).unwrap());
        }
    }
}
