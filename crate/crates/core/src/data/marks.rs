//! Annotator marks CSV: `video_id,annotator_id,t_mark`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::manifest::parse_field;
use super::types::AnnotatorMark;
use crate::error::{Error, Result};

pub fn load_marks(path: impl AsRef<Path>) -> Result<Vec<AnnotatorMark>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_marks(file)
}

pub fn read_marks(reader: impl Read) -> Result<Vec<AnnotatorMark>> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut seen = HashSet::new();
    let mut marks = Vec::new();
    for row in csv.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let video_id = row.get(0).unwrap_or("").to_string();
        let annotator_id = row.get(1).unwrap_or("").to_string();
        for (field, v) in [("video_id", &video_id), ("annotator_id", &annotator_id)] {
            if v.is_empty() {
                return Err(Error::MalformedRow {
                    row: line,
                    field: field.into(),
                    message: "required value is empty".into(),
                });
            }
        }
        let t_mark: f64 = parse_field(row.get(2).unwrap_or(""), line, "t_mark")?;
        if !(t_mark.is_finite() && t_mark >= 0.0) {
            return Err(Error::invariant(
                &video_id,
                format!("mark {t_mark} is negative"),
            ));
        }
        if !seen.insert((video_id.clone(), annotator_id.clone())) {
            return Err(Error::invariant(
                &video_id,
                format!("annotator `{annotator_id}` marked the video twice"),
            ));
        }
        marks.push(AnnotatorMark {
            video_id,
            annotator_id,
            t_mark,
        });
    }
    Ok(marks)
}

pub fn write_marks(path: impl AsRef<Path>, marks: &[AnnotatorMark]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_marks_to(file, marks)
}

pub fn write_marks_to(writer: impl Write, marks: &[AnnotatorMark]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["video_id", "annotator_id", "t_mark"])?;
    for m in marks {
        csv.write_record([
            m.video_id.as_str(),
            m.annotator_id.as_str(),
            &super::format_seconds(m.t_mark),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<marks>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_then_read() {
        let marks = vec![
            AnnotatorMark {
                video_id: "v1".into(),
                annotator_id: "a".into(),
                t_mark: 1.25,
            },
            AnnotatorMark {
                video_id: "v1".into(),
                annotator_id: "b".into(),
                t_mark: 2.0,
            },
        ];
        let mut buf = Vec::new();
        write_marks_to(&mut buf, &marks).unwrap();
        assert_eq!(read_marks(buf.as_slice()).unwrap(), marks);
    }

    #[test]
    fn duplicate_annotator_rejected() {
        let src = "video_id,annotator_id,t_mark\nv1,a,1.0\nv1,a,2.0\n";
        assert!(read_marks(src.as_bytes()).is_err());
    }

    #[test]
    fn negative_mark_rejected() {
        let src = "video_id,annotator_id,t_mark\nv1,a,-0.5\n";
        assert!(read_marks(src.as_bytes()).is_err());
    }
}
