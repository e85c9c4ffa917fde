//! Score-trace CSV: `video_id,t,score`, any number of videos per file.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;

use super::manifest::parse_field;
use super::types::ScoreTrace;
use crate::error::{Error, Result};

pub fn load_traces(path: impl AsRef<Path>) -> Result<Vec<ScoreTrace>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_traces(file)
}

/// Groups rows by video in first-appearance order.
pub fn read_traces(reader: impl Read) -> Result<Vec<ScoreTrace>> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut grouped: IndexMap<String, Vec<(f64, f64)>> = IndexMap::new();
    for row in csv.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let id = row.get(0).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::MalformedRow {
                row: line,
                field: "video_id".into(),
                message: "required value is empty".into(),
            });
        }
        let t: f64 = parse_field(row.get(1).unwrap_or(""), line, "t")?;
        let p: f64 = parse_field(row.get(2).unwrap_or(""), line, "score")?;
        grouped.entry(id).or_default().push((t, p));
    }
    grouped
        .into_iter()
        .map(|(id, samples)| ScoreTrace::new(id, samples))
        .collect()
}

pub fn write_traces(path: impl AsRef<Path>, traces: &[ScoreTrace]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_traces_to(file, traces)
}

pub fn write_traces_to(writer: impl Write, traces: &[ScoreTrace]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["video_id", "t", "score"])?;
    for trace in traces {
        for &(t, p) in trace.samples() {
            csv.write_record([trace.video_id(), &super::format_seconds(t), &format!("{p}")])?;
        }
    }
    csv.flush().map_err(|e| Error::io("<traces>", e))
}
