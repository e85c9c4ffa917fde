//! Ego-centric collision anticipation toolkit.
//!
//! Dataset bookkeeping, a trainable attentive-probe head over frozen video
//! embeddings, ranking and time-to-accident metrics, and a rule-based forward
//! collision warning baseline.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annotation;
pub mod data;
pub mod error;
pub mod fcw;
pub mod head;
pub mod metrics;
pub mod pipeline;
pub mod prep;
pub mod stats;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
