//! Detection traces as JSON lines, one frame per line:
//! `{"video_id":..,"t":..,"boxes":[{"class":..,"x0":..,"y0":..,"x1":..,"y1":..}]}`.
//! A line may also carry `"lane_polygon": [[x, y], ...]`.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::types::{BoundingBox, DetectionFrame, DetectionTrace};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct FrameLine {
    video_id: String,
    t: f64,
    #[serde(default)]
    boxes: Vec<BoundingBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lane_polygon: Option<Vec<[f64; 2]>>,
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<DetectionTrace>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_detections(file)
}

pub fn read_detections(reader: impl Read) -> Result<Vec<DetectionTrace>> {
    let mut traces: IndexMap<String, DetectionTrace> = IndexMap::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io("<detections>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let frame: FrameLine = serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
            row: i + 1,
            field: "json".into(),
            message: e.to_string(),
        })?;
        let trace = traces
            .entry(frame.video_id.clone())
            .or_insert_with(|| DetectionTrace {
                video_id: frame.video_id.clone(),
                frames: Vec::new(),
                lane_polygon: None,
            });
        if let Some(poly) = frame.lane_polygon {
            let poly: Vec<(f64, f64)> = poly.into_iter().map(|[x, y]| (x, y)).collect();
            match &trace.lane_polygon {
                Some(existing) if *existing != poly => {
                    return Err(Error::invariant(
                        &frame.video_id,
                        format!("conflicting lane polygon on line {}", i + 1),
                    ))
                }
                _ => trace.lane_polygon = Some(poly),
            }
        }
        trace.frames.push(DetectionFrame {
            t: frame.t,
            boxes: frame.boxes,
        });
    }
    let traces: Vec<DetectionTrace> = traces.into_values().collect();
    for t in &traces {
        t.validate()?;
    }
    Ok(traces)
}

pub fn write_detections(path: impl AsRef<Path>, traces: &[DetectionTrace]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_detections_to(&mut w, traces)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_detections_to(mut writer: impl Write, traces: &[DetectionTrace]) -> Result<()> {
    for trace in traces {
        for (i, frame) in trace.frames.iter().enumerate() {
            let line = FrameLine {
                video_id: trace.video_id.clone(),
                t: frame.t,
                boxes: frame.boxes.clone(),
                lane_polygon: if i == 0 {
                    trace
                        .lane_polygon
                        .as_ref()
                        .map(|p| p.iter().map(|&(x, y)| [x, y]).collect())
                } else {
                    None
                },
            };
            serde_json::to_writer(&mut writer, &line)?;
            writer
                .write_all(b"\n")
                .map_err(|e| Error::io("<detections>", e))?;
        }
    }
    Ok(())
}
