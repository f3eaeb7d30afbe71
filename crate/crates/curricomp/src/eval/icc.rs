//! Intraclass correlation between human and model scores.
//!
//! The variant is fixed to ICC(2,1): a two-way random-effects, single-rater,
//! absolute-agreement coefficient with the human and the model as two random
//! raters. Reports always print the variant name.

use crate::annotation::AlignmentLabel;
use crate::eval::granularity::{collapse, GranularityLevel};
use crate::eval::MetricError;

/// Name printed wherever an ICC value is reported.
pub const ICC_VARIANT: &str = "ICC(2,1)";

/// ICC(2,1) for two aligned raters:
/// (MS_R - MS_E) / (MS_R + (k-1) MS_E + (k/n)(MS_C - MS_E)) with k = 2.
///
/// Requires at least three subjects after any exclusions; zero total
/// variance leaves the coefficient undefined.
pub fn icc2_1(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 3 {
        return Err(MetricError::InsufficientData(n));
    }
    let nf = n as f64;
    let k = 2.0;

    let grand = (a.iter().sum::<f64>() + b.iter().sum::<f64>()) / (nf * k);
    let mean_a = a.iter().sum::<f64>() / nf;
    let mean_b = b.iter().sum::<f64>() / nf;

    let mut ss_total = 0.0;
    let mut ss_rows = 0.0;
    for i in 0..n {
        let row_mean = (a[i] + b[i]) / k;
        ss_rows += k * (row_mean - grand).powi(2);
        ss_total += (a[i] - grand).powi(2) + (b[i] - grand).powi(2);
    }
    let ss_cols = nf * ((mean_a - grand).powi(2) + (mean_b - grand).powi(2));
    let ss_err = ss_total - ss_rows - ss_cols;

    if ss_total.abs() < 1e-12 {
        return Err(MetricError::ZeroVariance);
    }

    let ms_rows = ss_rows / (nf - 1.0);
    let ms_cols = ss_cols / (k - 1.0);
    let ms_err = ss_err / ((nf - 1.0) * (k - 1.0));

    let denom = ms_rows + (k - 1.0) * ms_err + (k / nf) * (ms_cols - ms_err);
    if denom.abs() < 1e-12 {
        return Err(MetricError::ZeroVariance);
    }
    Ok((ms_rows - ms_err) / denom)
}

/// ICC(2,1) on collapsed ordinal codes at a level.
///
/// At the 5-level, pairs with NA on either side are excluded first (NA has
/// no ordinal value there); coarser levels merge NA into the bottom class,
/// so every pair contributes.
pub fn icc_at_level(
    gold: &[AlignmentLabel],
    pred: &[AlignmentLabel],
    level: GranularityLevel,
) -> Result<f64, MetricError> {
    if gold.len() != pred.len() {
        return Err(MetricError::LengthMismatch(gold.len(), pred.len()));
    }
    let mut a = Vec::with_capacity(gold.len());
    let mut b = Vec::with_capacity(pred.len());
    for (g, p) in gold.iter().zip(pred) {
        if level == GranularityLevel::L5
            && (*g == AlignmentLabel::Na || *p == AlignmentLabel::Na)
        {
            continue;
        }
        a.push(collapse(*g, level).code as f64);
        b.push(collapse(*p, level).code as f64);
    }
    icc2_1(&a, &b)
}
