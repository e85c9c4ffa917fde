//! Domain types and the file formats shared by every other module.

mod detection;
mod embedding;
mod manifest;
mod marks;
mod trace;
mod types;

pub use detection::{load_detections, read_detections, write_detections, write_detections_to};
pub use embedding::{
    load_embedding, load_embedding_index, read_embedding, write_embedding, write_embedding_index,
    write_embedding_to, EmbeddingIndexEntry, EMBEDDING_MAGIC,
};
pub(crate) use manifest::parse_field;
pub use manifest::{
    load_manifest, read_manifest, write_manifest, write_manifest_to, MANIFEST_COLUMNS,
};
pub use marks::{load_marks, read_marks, write_marks, write_marks_to};
pub use trace::{load_traces, read_traces, write_traces, write_traces_to};
pub use types::{
    AnnotatorMark, BoundingBox, DetectionFrame, DetectionTrace, EmbeddingClip, Outcome, ScoreTrace,
    SourceDataset, Split, VideoRecord,
};

/// Decimal seconds with at least two fractional digits and no precision loss.
pub fn format_seconds(t: f64) -> String {
    let mut s = format!("{t}");
    match s.find('.') {
        None => s.push_str(".00"),
        Some(dot) if s.len() - dot == 2 => s.push('0'),
        _ => {}
    }
    s
}

/// Join key for clip times coming from different files.
pub(crate) fn time_key(t: f64) -> String {
    format!("{t:.6}")
}
