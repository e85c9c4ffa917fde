//! Video manifest CSV.
//!
//! Header: `video_id,source_dataset,duration_s,fps,outcome,t_alert,t_event,category,split`
//! with an optional trailing `note` column. Empty cells are absent optionals.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::format_seconds;
use super::types::{Split, VideoRecord};
use crate::error::{Error, Result};

pub const MANIFEST_COLUMNS: [&str; 9] = [
    "video_id",
    "source_dataset",
    "duration_s",
    "fps",
    "outcome",
    "t_alert",
    "t_event",
    "category",
    "split",
];

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<VideoRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_manifest(file)
}

/// Parses a manifest, validating every record; records keep file order.
pub fn read_manifest(reader: impl Read) -> Result<Vec<VideoRecord>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = csv.headers()?.clone();
    let column = |name: &str| header.iter().position(|h| h == name);
    let mut idx = [0usize; 9];
    for (slot, name) in idx.iter_mut().zip(MANIFEST_COLUMNS) {
        *slot = column(name).ok_or_else(|| Error::MalformedRow {
            row: 1,
            field: name.to_string(),
            message: "missing column in header".into(),
        })?;
    }
    let note_idx = column("note");

    let mut records = Vec::new();
    for row in csv.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let cell = |i: usize| row.get(idx[i]).unwrap_or("");
        let record = VideoRecord {
            video_id: required(cell(0), line, "video_id")?.to_string(),
            source_dataset: parse_field(cell(1), line, "source_dataset")?,
            duration_s: parse_field(cell(2), line, "duration_s")?,
            fps: parse_field(cell(3), line, "fps")?,
            outcome: parse_field(cell(4), line, "outcome")?,
            t_alert: parse_optional(cell(5), line, "t_alert")?,
            t_event: parse_optional(cell(6), line, "t_event")?,
            category: non_empty(cell(7)),
            split: parse_optional::<Split>(cell(8), line, "split")?,
            note: note_idx.and_then(|i| row.get(i)).and_then(non_empty),
        };
        record.validate()?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[VideoRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_manifest_to(file, records)
}

/// Writes the canonical form: fixed column order, times with at least two
/// decimals, `note` column only when some record carries a note.
pub fn write_manifest_to(writer: impl Write, records: &[VideoRecord]) -> Result<()> {
    let with_note = records.iter().any(|r| r.note.is_some());
    let mut csv = csv::WriterBuilder::new().from_writer(writer);
    let mut header: Vec<&str> = MANIFEST_COLUMNS.to_vec();
    if with_note {
        header.push("note");
    }
    csv.write_record(&header)?;
    let opt_time = |t: Option<f64>| t.map(format_seconds).unwrap_or_default();
    for r in records {
        let mut row = vec![
            r.video_id.clone(),
            r.source_dataset.to_string(),
            format_seconds(r.duration_s),
            format_seconds(r.fps),
            r.outcome.to_string(),
            opt_time(r.t_alert),
            opt_time(r.t_event),
            r.category.clone().unwrap_or_default(),
            r.split.map(|s| s.to_string()).unwrap_or_default(),
        ];
        if with_note {
            row.push(r.note.clone().unwrap_or_default());
        }
        csv.write_record(&row)?;
    }
    csv.flush().map_err(|e| Error::io("<manifest>", e))?;
    Ok(())
}

fn non_empty(s: &str) -> Option<String> {
    let s = s.trim();
    (!s.is_empty()).then(|| s.to_string())
}

fn required<'a>(s: &'a str, row: usize, field: &str) -> Result<&'a str> {
    if s.trim().is_empty() {
        Err(Error::MalformedRow {
            row,
            field: field.into(),
            message: "required value is empty".into(),
        })
    } else {
        Ok(s)
    }
}

pub(crate) fn parse_field<T>(s: &str, row: usize, field: &str) -> Result<T>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    required(s, row, field)?
        .trim()
        .parse()
        .map_err(|e: T::Err| Error::MalformedRow {
            row,
            field: field.into(),
            message: e.to_string(),
        })
}

fn parse_optional<T>(s: &str, row: usize, field: &str) -> Result<Option<T>>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_field(s, row, field).map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::types::{Outcome, SourceDataset};

    const HEADER: &str =
        "video_id,source_dataset,duration_s,fps,outcome,t_alert,t_event,category,split\n";

    fn parse(rows: &str) -> Result<Vec<VideoRecord>> {
        read_manifest(format!("{HEADER}{rows}").as_bytes())
    }

    #[test]
    fn maps_fields() {
        let recs = parse("v1,Nexar,40.0,30,positive_ego,19.2,21.0,vehicle,test\n").unwrap();
        let r = &recs[0];
        assert_eq!(r.video_id, "v1");
        assert_eq!(r.source_dataset, SourceDataset::Nexar);
        assert_eq!(r.outcome, Outcome::PositiveEgo);
        assert_eq!(r.t_alert, Some(19.2));
        assert_eq!(r.t_event, Some(21.0));
        assert_eq!(r.category.as_deref(), Some("vehicle"));
        assert_eq!(r.split, Some(Split::Test));
    }

    #[test]
    fn alert_after_event() {
        let err = parse("v1,Nexar,40.0,30,positive_ego,22.0,21.0,vehicle,test\n").unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("v1") && msg.contains("alert after event"),
            "{msg}"
        );
    }

    #[test]
    fn negative_with_event() {
        let err = parse("n1,DAD,5.0,20,negative,,5.0,,train\n").unwrap_err();
        assert!(err.to_string().contains("negative with event time"));
    }

    #[test]
    fn malformed_names_row_and_field() {
        let err = parse("v1,Nexar,40.0,30,positive_ego,,21.0,,\nv2,Nexar,abc,30,negative,,,,\n")
            .unwrap_err();
        match err {
            Error::MalformedRow { row, field, .. } => {
                assert_eq!(row, 3);
                assert_eq!(field, "duration_s");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_cells_are_absent() {
        let recs = parse("n1,DAD,5.0,20,negative,,,,\n").unwrap();
        assert_eq!(recs[0].t_alert, None);
        assert_eq!(recs[0].category, None);
        assert_eq!(recs[0].split, None);
    }

    #[test]
    fn canonical_write_is_a_fixed_point() {
        let src = "v1,Nexar,40,30,positive_ego,19.2,21,vehicle,test\nn1,DADA-2000,5.125,29.97,negative,,,,\n";
        let recs = parse(src).unwrap();
        let mut first = Vec::new();
        write_manifest_to(&mut first, &recs).unwrap();
        let text = String::from_utf8(first.clone()).unwrap();
        assert!(text.contains("v1,Nexar,40.00,30.00,positive_ego,19.20,21.00,vehicle,test"));
        assert!(text.contains("n1,DADA2000,5.125,29.97,negative,,,,"));
        let again = read_manifest(first.as_slice()).unwrap();
        assert_eq!(again, recs);
        let mut second = Vec::new();
        write_manifest_to(&mut second, &again).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn note_column_survives() {
        let src =
            "video_id,source_dataset,duration_s,fps,outcome,t_alert,t_event,category,split,note\n\
                   v1,Nexar,40,30,positive_ego,,21,,,near-miss swerve\n";
        let recs = read_manifest(src.as_bytes()).unwrap();
        assert_eq!(recs[0].note.as_deref(), Some("near-miss swerve"));
        let mut out = Vec::new();
        write_manifest_to(&mut out, &recs).unwrap();
        assert!(String::from_utf8(out)
            .unwrap()
            .ends_with(",near-miss swerve\n"));
    }
}
