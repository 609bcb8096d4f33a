//! Evaluation harness: label-driven metric computation over audit findings.
//!
//! Computes precision at three granularities, H/M/L recall with many-to-one
//! matching, cluster-level metrics, the review-verdict table, the
//! false-positive taxonomy, the property-type ablation, and the accounting
//! reconciliation. All percentages are exact rationals rounded half-up to one
//! decimal.

pub mod labels;
pub mod matching;
pub mod metrics;
pub mod rational;
pub mod report;

pub use labels::{GroundTruthIssue, LabelRow, Subset};
pub use metrics::evaluate;
pub use report::MetricsReport;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("labels file invalid at row {row}: {detail}")]
    BadLabelRow { row: usize, detail: String },
    #[error("ground truth invalid: {0}")]
    BadGroundTruth(String),
    #[error("match confirmation missing for finding {0}")]
    UnconfirmedMatch(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
}
