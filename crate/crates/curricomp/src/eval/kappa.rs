//! Weighted Cohen's kappa over collapsed ordinal labels.

use serde::{Deserialize, Serialize};

use crate::annotation::AlignmentLabel;
use crate::eval::granularity::{collapse, GranularityLevel};
use crate::eval::MetricError;

/// Disagreement weighting scheme for weighted kappa.
///
/// Quadratic is the default for ordinal rubric scores; linear is available
/// behind configuration and every report names the scheme in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    #[default]
    Quadratic,
    Linear,
}

impl WeightScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightScheme::Quadratic => "quadratic",
            WeightScheme::Linear => "linear",
        }
    }
}

/// Disagreement weight between class codes `i` and `j` at a level.
///
/// Scored classes use w = (|i-j|/(k-1))^p with k the class count of the
/// level and p = 2 (quadratic) or 1 (linear). At the 5-level, NA (code 4) is
/// non-ordinal: confusing it with any scored class carries the maximal
/// weight 1, and NA-vs-NA carries 0.
pub fn disagreement_weight(
    level: GranularityLevel,
    scheme: WeightScheme,
    i: usize,
    j: usize,
) -> f64 {
    if level == GranularityLevel::L5 && (i == 4 || j == 4) {
        return if i == j { 0.0 } else { 1.0 };
    }
    let k = level.class_count() as f64;
    let d = (i as f64 - j as f64).abs() / (k - 1.0);
    match scheme {
        WeightScheme::Quadratic => d * d,
        WeightScheme::Linear => d,
    }
}

/// Weighted Cohen's kappa: 1 - sum(w*O) / sum(w*E), with O the observed
/// joint distribution and E the product of the two marginals.
pub fn weighted_kappa(
    gold: &[AlignmentLabel],
    pred: &[AlignmentLabel],
    level: GranularityLevel,
    scheme: WeightScheme,
) -> Result<f64, MetricError> {
    if gold.len() != pred.len() || gold.is_empty() {
        return Err(MetricError::LengthMismatch(gold.len(), pred.len()));
    }
    let k = level.class_count();
    let n = gold.len() as f64;
    let mut observed = vec![vec![0.0f64; k]; k];
    let mut gold_marginal = vec![0.0f64; k];
    let mut pred_marginal = vec![0.0f64; k];
    for (g, p) in gold.iter().zip(pred) {
        let gi = collapse(*g, level).code;
        let pi = collapse(*p, level).code;
        observed[gi][pi] += 1.0 / n;
        gold_marginal[gi] += 1.0 / n;
        pred_marginal[pi] += 1.0 / n;
    }
    let mut weighted_observed = 0.0;
    let mut weighted_expected = 0.0;
    for i in 0..k {
        for j in 0..k {
            let w = disagreement_weight(level, scheme, i, j);
            weighted_observed += w * observed[i][j];
            weighted_expected += w * gold_marginal[i] * pred_marginal[j];
        }
    }
    if weighted_expected.abs() < 1e-12 {
        return Err(MetricError::DegenerateAgreement);
    }
    Ok(1.0 - weighted_observed / weighted_expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::cohen_kappa;
    use crate::annotation::AlignmentLabel::*;
    use proptest::prelude::*;
    use GranularityLevel::*;

    #[test]
    fn identical_lists_score_one() {
        let labels = vec![S3, S1, S0, Na, S2, S2];
        for level in GranularityLevel::ALL {
            for scheme in [WeightScheme::Quadratic, WeightScheme::Linear] {
                let k = weighted_kappa(&labels, &labels, level, scheme).unwrap();
                assert!((k - 1.0).abs() < 1e-12, "{level} {scheme:?}: {k}");
            }
        }
    }

    #[test]
    fn binary_level_reduces_to_unweighted_kappa() {
        // At two classes the weights are 0/1, so the weighted statistic
        // coincides with plain Cohen's kappa on the collapsed labels.
        let gold = vec![S3, S0, Na, S2, S1, S0, S3, Na];
        let pred = vec![S0, S0, S3, S2, Na, S1, S3, Na];
        let collapsed_as_label = |l: AlignmentLabel| {
            if collapse(l, L2).code == 1 {
                S3
            } else {
                S0
            }
        };
        let cg: Vec<_> = gold.iter().map(|&l| collapsed_as_label(l)).collect();
        let cp: Vec<_> = pred.iter().map(|&l| collapsed_as_label(l)).collect();
        let wk = weighted_kappa(&gold, &pred, L2, WeightScheme::Quadratic).unwrap();
        let uk = cohen_kappa(&cg, &cp).unwrap();
        assert!((wk - uk).abs() < 1e-12);
    }

    #[test]
    fn na_confusion_has_maximal_weight_at_l5() {
        assert_eq!(disagreement_weight(L5, WeightScheme::Quadratic, 4, 0), 1.0);
        assert_eq!(disagreement_weight(L5, WeightScheme::Quadratic, 3, 4), 1.0);
        assert_eq!(disagreement_weight(L5, WeightScheme::Quadratic, 4, 4), 0.0);
        // Scored-vs-scored disagreements scale by the 5-class span, so even
        // the widest one stays below the NA weight.
        let widest = disagreement_weight(L5, WeightScheme::Quadratic, 0, 3);
        assert!((widest - 0.5625).abs() < 1e-12);
    }

    #[test]
    fn degenerate_agreement_is_an_error() {
        let labels = vec![S2, S2, S2];
        for level in GranularityLevel::ALL {
            assert!(matches!(
                weighted_kappa(&labels, &labels, level, WeightScheme::Quadratic),
                Err(MetricError::DegenerateAgreement)
            ));
        }
    }

    proptest! {
        #[test]
        fn weighted_kappa_is_symmetric(
            pairs in proptest::collection::vec((0usize..5, 0usize..5), 2..40),
            level_idx in 0usize..4,
            linear in proptest::bool::ANY,
        ) {
            let level = GranularityLevel::ALL[level_idx];
            let scheme = if linear { WeightScheme::Linear } else { WeightScheme::Quadratic };
            let a: Vec<_> = pairs.iter().map(|&(x, _)| AlignmentLabel::ALL[x]).collect();
            let b: Vec<_> = pairs.iter().map(|&(_, y)| AlignmentLabel::ALL[y]).collect();
            if let Ok(k_ab) = weighted_kappa(&a, &b, level, scheme) {
                let k_ba = weighted_kappa(&b, &a, level, scheme).unwrap();
                prop_assert!((k_ab - k_ba).abs() < 1e-9);
                prop_assert!(k_ab <= 1.0 + 1e-12);
            }
        }
    }
}
