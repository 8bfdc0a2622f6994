//! Leave-one-subject-out evaluation and its reports.

mod loso;
mod metrics;
mod report;

pub use loso::{
    loso_folds, predict_records, read_prediction_dump, run_loso, run_loso_folds, write_prediction_dump, LosoOutcome, DUMP_HEADER,
};
pub use metrics::{
    confusion, fn_fp_counts, fn_fp_ratio, layer_accuracy, total_accuracy, Accuracy, Column, Confusion, FnFp,
    PerActivity, PredictionRecord,
};
pub use report::{
    aggregate_folds, evaluate_fold, evaluate_records, presence_threshold, CellSummary, EvaluationReport, FnFpSummary,
    FoldReport,
};
