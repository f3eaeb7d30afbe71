//! Granularity collapse, agreement and performance metrics, and the
//! per-slice evaluation reports assembled from them.

mod confusion;
mod granularity;
mod icc;
mod kappa;
mod mcg;
mod report;

pub use confusion::{ConfusionMatrix, MacroPrf};
pub use granularity::{collapse, score_difference, CollapsedLabel, GranularityLevel};
pub use icc::{icc2_1, icc_at_level, ICC_VARIANT};
pub use kappa::{disagreement_weight, weighted_kappa, WeightScheme};
pub use mcg::mcg_accuracy;
pub use report::{evaluate_slice, render_markdown, write_eval_csv, EvalPair, EvalReport};

use thiserror::Error;

/// Errors from metric computations. Undefined statistics are reported, never
/// silently coerced to a value.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("label lists must be aligned and non-empty (got {0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("matrix shape does not match the granularity level")]
    ShapeMismatch,
    #[error("agreement is undefined when both raters use a single shared category")]
    DegenerateAgreement,
    #[error("need at least 3 subjects after exclusions, have {0}")]
    InsufficientData(usize),
    #[error("coefficient undefined: no variance in the data")]
    ZeroVariance,
    #[error("probabilities must be non-negative and sum to 1")]
    InvalidDistribution,
}
