//! Ranking and temporal evaluation metrics.

mod ranking;
mod report;
mod temporal;

pub use ranking::{average_precision, precision_recall_at, roc_auc, video_score, Aggregation};
pub use report::{
    evaluate, match_traces, read_eval_table, write_eval_table, write_eval_table_to,
    write_tta_long_to, EvalOptions, EvalReport, EvalRow,
};
pub use temporal::{
    first_crossing, mtta, recall_by_category, tta_distribution, CategoryRecall, MttaResult,
    PositiveTrace, TtaDistribution,
};
