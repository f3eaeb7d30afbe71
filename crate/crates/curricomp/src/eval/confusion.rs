//! Confusion matrices and the classification metrics computed from them.

use crate::annotation::AlignmentLabel;
use crate::eval::granularity::{collapse, GranularityLevel};
use crate::eval::MetricError;

/// Gold-by-predicted count grid at one granularity level.
///
/// Rows index the gold class code, columns the predicted class code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub level: GranularityLevel,
    pub counts: Vec<Vec<usize>>,
}

/// Macro-averaged precision, recall, and F1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ConfusionMatrix {
    /// Tally aligned gold/predicted rubric labels at a level.
    pub fn from_labels(
        gold: &[AlignmentLabel],
        pred: &[AlignmentLabel],
        level: GranularityLevel,
    ) -> Result<Self, MetricError> {
        if gold.len() != pred.len() || gold.is_empty() {
            return Err(MetricError::LengthMismatch(gold.len(), pred.len()));
        }
        let k = level.class_count();
        let mut counts = vec![vec![0usize; k]; k];
        for (g, p) in gold.iter().zip(pred) {
            counts[collapse(*g, level).code][collapse(*p, level).code] += 1;
        }
        Ok(ConfusionMatrix { level, counts })
    }

    /// Build directly from counts; grid must be square and non-empty.
    pub fn from_counts(
        level: GranularityLevel,
        counts: Vec<Vec<usize>>,
    ) -> Result<Self, MetricError> {
        let k = level.class_count();
        if counts.len() != k || counts.iter().any(|row| row.len() != k) {
            return Err(MetricError::ShapeMismatch);
        }
        if counts.iter().flatten().sum::<usize>() == 0 {
            return Err(MetricError::EmptyInput);
        }
        Ok(ConfusionMatrix { level, counts })
    }

    pub fn n_pairs(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Fraction of pairs on the diagonal.
    pub fn accuracy(&self) -> f64 {
        let correct: usize = (0..self.counts.len()).map(|i| self.counts[i][i]).sum();
        correct as f64 / self.n_pairs() as f64
    }

    /// Macro-averaged precision, recall, and F1.
    ///
    /// Per class: P = tp/(tp+fp), R = tp/(tp+fn), F1 = 2PR/(P+R), each
    /// defined as 0 when its denominator is 0. The macro average runs over
    /// classes observed in gold or predictions, not the theoretical class
    /// set, so never-occurring classes cannot deflate sparse slices.
    pub fn macro_prf(&self) -> MacroPrf {
        let k = self.counts.len();
        let mut p_sum = 0.0;
        let mut r_sum = 0.0;
        let mut f_sum = 0.0;
        let mut present = 0usize;
        for c in 0..k {
            let row_sum: usize = self.counts[c].iter().sum();
            let col_sum: usize = (0..k).map(|r| self.counts[r][c]).sum();
            if row_sum == 0 && col_sum == 0 {
                continue;
            }
            present += 1;
            let tp = self.counts[c][c] as f64;
            let precision = if col_sum > 0 { tp / col_sum as f64 } else { 0.0 };
            let recall = if row_sum > 0 { tp / row_sum as f64 } else { 0.0 };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            p_sum += precision;
            r_sum += recall;
            f_sum += f1;
        }
        let denom = present.max(1) as f64;
        MacroPrf {
            precision: p_sum / denom,
            recall: r_sum / denom,
            f1: f_sum / denom,
        }
    }

    /// Aggregate a 5-level matrix into a coarser level by merging cells.
    pub fn aggregate_to(&self, level: GranularityLevel) -> Result<ConfusionMatrix, MetricError> {
        if self.level != GranularityLevel::L5 {
            return Err(MetricError::ShapeMismatch);
        }
        let k = level.class_count();
        let mut counts = vec![vec![0usize; k]; k];
        for (gi, glabel) in AlignmentLabel::ALL.iter().enumerate() {
            for (pi, plabel) in AlignmentLabel::ALL.iter().enumerate() {
                let g = collapse(*glabel, level).code;
                let p = collapse(*plabel, level).code;
                counts[g][p] += self.counts[gi][pi];
            }
        }
        Ok(ConfusionMatrix { level, counts })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::AlignmentLabel::*;
    use GranularityLevel::*;

    #[test]
    fn accuracy_of_diagonal_matrix_is_one() {
        let cm = ConfusionMatrix::from_counts(L2, vec![vec![3, 0], vec![0, 5]]).unwrap();
        assert_eq!(cm.accuracy(), 1.0);
    }

    #[test]
    fn accuracy_of_zero_diagonal_is_zero() {
        let cm = ConfusionMatrix::from_counts(L2, vec![vec![0, 2], vec![4, 0]]).unwrap();
        assert_eq!(cm.accuracy(), 0.0);
    }

    #[test]
    fn accuracy_of_mixed_two_class_matrix() {
        let cm = ConfusionMatrix::from_counts(L2, vec![vec![3, 1], vec![1, 3]]).unwrap();
        assert!((cm.accuracy() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn macro_prf_perfect_diagonal() {
        let cm = ConfusionMatrix::from_counts(L3, vec![vec![2, 0, 0], vec![0, 3, 0], vec![0, 0, 4]])
            .unwrap();
        let prf = cm.macro_prf();
        assert_eq!((prf.precision, prf.recall, prf.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn macro_prf_applies_zero_denominator_rule() {
        // Gold has both classes, predictions collapse onto class 0:
        // P = (0.5, 0), R = (1, 0) -> macro-P 0.25, macro-R 0.5.
        let cm = ConfusionMatrix::from_counts(L2, vec![vec![2, 0], vec![2, 0]]).unwrap();
        let prf = cm.macro_prf();
        assert!((prf.precision - 0.25).abs() < 1e-12);
        assert!((prf.recall - 0.5).abs() < 1e-12);
    }

    #[test]
    fn macro_average_skips_absent_classes() {
        // Only class 1 ever appears; class 0 and 2 must not dilute the mean.
        let cm = ConfusionMatrix::from_counts(L3, vec![vec![0, 0, 0], vec![0, 4, 0], vec![0, 0, 0]])
            .unwrap();
        let prf = cm.macro_prf();
        assert_eq!((prf.precision, prf.recall, prf.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn from_labels_collapses_before_counting() {
        let gold = vec![S0, Na, S1, S3];
        let pred = vec![Na, S0, S2, S3];
        let cm = ConfusionMatrix::from_labels(&gold, &pred, L2).unwrap();
        // S0/Na pairs agree in the merged bottom class; S1 vs S2 agree as
        // covered; S3 agrees.
        assert!((cm.accuracy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aggregation_matches_direct_collapse() {
        let gold = vec![S0, Na, S1, S3, S2, S2, Na, S0, S1, S3];
        let pred = vec![Na, S2, S2, S0, S2, S1, Na, S0, S3, S3];
        let five = ConfusionMatrix::from_labels(&gold, &pred, L5).unwrap();
        for level in [L4, L3, L2] {
            let aggregated = five.aggregate_to(level).unwrap();
            let direct = ConfusionMatrix::from_labels(&gold, &pred, level).unwrap();
            assert_eq!(aggregated, direct);
            assert!((aggregated.accuracy() - direct.accuracy()).abs() < 1e-15);
        }
    }
}
