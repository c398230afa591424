//! Scoring labels and logs against ground truth.

mod accuracy;
mod alignment;
mod matching;
mod report;

pub use accuracy::{label_accuracy, AccuracyReport, LabelScore, DEFAULT_MIN_SUPPORT};
pub use alignment::{
    edit_distance_alignment, levenshtein, per_date_alignment, remove_self_loops, AlignmentReport, EventCounts,
};
pub use matching::{match_events, MatchCounts};
pub use report::{check_floors, render_summary, write_accuracy_csv, write_alignment_csv, FloorViolation, MetricFloors};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("{predicted} predictions for {truth} truth labels")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("truth label {0:?} is outside the taxonomy")]
    UnknownTruthLabel(String),
}
