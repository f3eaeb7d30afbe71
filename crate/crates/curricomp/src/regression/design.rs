//! Pair-level observations and dummy-coded design matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::corpus::{DocumentType, SubjectCategory};
use crate::eval::GranularityLevel;
use crate::framework::FrameworkKey;
use crate::regression::RegressionError;

/// Dependent variable of the heterogeneity model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dependent {
    /// 1 when the collapsed prediction equals the collapsed gold label.
    Accuracy,
    /// Predicted minus gold score at the record's level.
    ScoreDiff,
}

impl Dependent {
    pub fn as_str(self) -> &'static str {
        match self {
            Dependent::Accuracy => "accuracy",
            Dependent::ScoreDiff => "scorediff",
        }
    }
}

/// One prediction/gold pair at one granularity level.
#[derive(Debug, Clone)]
pub struct PairObservation {
    pub y_accuracy: bool,
    /// Absent at the 5-level when either label is NA.
    pub y_scorediff: Option<f64>,
    pub doc_type: DocumentType,
    pub model_name: String,
    pub framework: FrameworkKey,
    pub subject: SubjectCategory,
    pub word_count: f64,
    pub level: GranularityLevel,
}

/// Knobs for the design encoding; defaults match the headline analysis.
#[derive(Debug, Clone)]
pub struct EncodeOptions {
    /// Reference model level. When unset, `gpt-4o` is used if present,
    /// otherwise the lexicographically first model.
    pub reference_model: Option<String>,
    pub reference_subject: SubjectCategory,
    /// Z-score the word-count column (the default); raw scale otherwise.
    pub standardize_word_count: bool,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            reference_model: None,
            reference_subject: SubjectCategory::Stem,
            standardize_word_count: true,
        }
    }
}

/// A dummy-coded design matrix with its term names and encoding metadata.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub terms: Vec<String>,
    /// Effective reference level per factor, as encoded.
    pub reference_levels: Vec<(String, String)>,
    /// Factor levels absent from the data, dummies dropped.
    pub warnings: Vec<String>,
    /// Rows dropped because the dependent was undefined.
    pub n_dropped: usize,
    pub standardized_word_count: bool,
}

/// Reference categories for the fixed factors: learning objectives and the
/// EU framework anchor the document-type and framework dummies.
const REFERENCE_DOC_TYPE: DocumentType = DocumentType::LearningObjective;
const REFERENCE_FRAMEWORK: FrameworkKey = FrameworkKey::Eu;

/// Build the design matrix: intercept, document-type dummies, standardized
/// word count, model dummies, framework dummies, and subject dummies.
///
/// A factor level absent from the data simply contributes no dummy (with a
/// warning); if the configured reference level itself is absent, the first
/// present level takes its place so the intercept stays identified.
pub fn encode_design(
    obs: &[PairObservation],
    dependent: Dependent,
    opts: &EncodeOptions,
) -> Result<DesignMatrix, RegressionError> {
    if obs.is_empty() {
        return Err(RegressionError::EmptyObservations);
    }

    let mut rows: Vec<&PairObservation> = Vec::with_capacity(obs.len());
    let mut n_dropped = 0usize;
    for o in obs {
        match dependent {
            Dependent::Accuracy => rows.push(o),
            Dependent::ScoreDiff => {
                if o.y_scorediff.is_some() {
                    rows.push(o);
                } else {
                    n_dropped += 1;
                }
            }
        }
    }
    if rows.is_empty() {
        return Err(RegressionError::EmptyAfterDrop);
    }

    let mut warnings = Vec::new();
    let mut reference_levels = Vec::new();

    // Document types, in enum order.
    let doc_levels: Vec<DocumentType> = DocumentType::ALL
        .into_iter()
        .filter(|dt| rows.iter().any(|o| o.doc_type == *dt))
        .collect();
    for dt in DocumentType::ALL {
        if !doc_levels.contains(&dt) {
            warnings.push(format!("doc_type level {dt} absent; dummy dropped"));
        }
    }
    let doc_reference = pick_reference(
        &doc_levels,
        REFERENCE_DOC_TYPE,
        &mut warnings,
        "doc_type",
    );
    reference_levels.push(("doc_type".into(), doc_reference.to_string()));

    // Models, sorted by name.
    let mut model_levels: Vec<String> = rows.iter().map(|o| o.model_name.clone()).collect();
    model_levels.sort();
    model_levels.dedup();
    let model_reference = match &opts.reference_model {
        Some(m) if model_levels.iter().any(|x| x == m) => m.clone(),
        Some(m) => {
            warnings.push(format!(
                "reference model {m:?} absent; using {:?}",
                preferred_model(&model_levels)
            ));
            preferred_model(&model_levels)
        }
        None => preferred_model(&model_levels),
    };
    reference_levels.push(("model".into(), model_reference.clone()));

    // Frameworks, in enum order.
    let fw_levels: Vec<FrameworkKey> = FrameworkKey::ALL
        .into_iter()
        .filter(|k| rows.iter().any(|o| o.framework == *k))
        .collect();
    for k in FrameworkKey::ALL {
        if !fw_levels.contains(&k) {
            warnings.push(format!("framework level {k} absent; dummy dropped"));
        }
    }
    let fw_reference =
        pick_reference(&fw_levels, REFERENCE_FRAMEWORK, &mut warnings, "framework");
    reference_levels.push(("framework".into(), fw_reference.to_string()));

    // Subjects, in enum order.
    let subject_levels: Vec<SubjectCategory> = SubjectCategory::ALL
        .into_iter()
        .filter(|s| rows.iter().any(|o| o.subject == *s))
        .collect();
    for s in SubjectCategory::ALL {
        if !subject_levels.contains(&s) {
            warnings.push(format!("subject level {s} absent; dummy dropped"));
        }
    }
    let subject_reference = pick_reference(
        &subject_levels,
        opts.reference_subject,
        &mut warnings,
        "subject",
    );
    reference_levels.push(("subject".into(), subject_reference.to_string()));

    // Word-count scaling.
    let n = rows.len();
    let raw_wc: Vec<f64> = rows.iter().map(|o| o.word_count).collect();
    let wc: Vec<f64> = if opts.standardize_word_count {
        let mean = raw_wc.iter().sum::<f64>() / n as f64;
        let var = raw_wc.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
            / (n as f64 - 1.0).max(1.0);
        let sd = var.sqrt();
        if sd < 1e-12 {
            warnings.push("word_count is constant; standardized column is all zeros".into());
            raw_wc.iter().map(|x| x - mean).collect()
        } else {
            raw_wc.iter().map(|x| (x - mean) / sd).collect()
        }
    } else {
        raw_wc
    };

    let mut terms: Vec<String> = vec!["intercept".into()];
    terms.extend(
        doc_levels
            .iter()
            .filter(|&&dt| dt != doc_reference)
            .map(|dt| format!("doc_type:{dt}")),
    );
    terms.push("word_count".into());
    terms.extend(
        model_levels
            .iter()
            .filter(|m| **m != model_reference)
            .map(|m| format!("model:{m}")),
    );
    terms.extend(
        fw_levels
            .iter()
            .filter(|&&k| k != fw_reference)
            .map(|k| format!("framework:{k}")),
    );
    terms.extend(
        subject_levels
            .iter()
            .filter(|&&s| s != subject_reference)
            .map(|s| format!("subject:{s}")),
    );

    let p = terms.len();
    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    for (i, o) in rows.iter().enumerate() {
        y[i] = match dependent {
            Dependent::Accuracy => {
                if o.y_accuracy {
                    1.0
                } else {
                    0.0
                }
            }
            Dependent::ScoreDiff => o.y_scorediff.expect("rows filtered"),
        };
        let mut col = 0usize;
        x[(i, col)] = 1.0;
        col += 1;
        for dt in doc_levels.iter().filter(|&&dt| dt != doc_reference) {
            x[(i, col)] = if o.doc_type == *dt { 1.0 } else { 0.0 };
            col += 1;
        }
        x[(i, col)] = wc[i];
        col += 1;
        for m in model_levels.iter().filter(|m| **m != model_reference) {
            x[(i, col)] = if o.model_name == *m { 1.0 } else { 0.0 };
            col += 1;
        }
        for k in fw_levels.iter().filter(|&&k| k != fw_reference) {
            x[(i, col)] = if o.framework == *k { 1.0 } else { 0.0 };
            col += 1;
        }
        for s in subject_levels.iter().filter(|&&s| s != subject_reference) {
            x[(i, col)] = if o.subject == *s { 1.0 } else { 0.0 };
            col += 1;
        }
        debug_assert_eq!(col, p);
    }

    Ok(DesignMatrix {
        x,
        y,
        terms,
        reference_levels,
        warnings,
        n_dropped,
        standardized_word_count: opts.standardize_word_count,
    })
}

fn pick_reference<T: Copy + PartialEq + std::fmt::Display>(
    present: &[T],
    configured: T,
    warnings: &mut Vec<String>,
    factor: &str,
) -> T {
    if present.contains(&configured) {
        configured
    } else {
        let fallback = present[0];
        warnings.push(format!(
            "{factor} reference {configured} absent; using {fallback}"
        ));
        fallback
    }
}

/// The preferred reference model: the strongest evaluated model when
/// present, otherwise the first by name.
fn preferred_model(levels: &[String]) -> String {
    levels
        .iter()
        .find(|m| m.as_str() == "gpt-4o")
        .cloned()
        .unwrap_or_else(|| levels[0].clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(
        doc_type: DocumentType,
        model: &str,
        framework: FrameworkKey,
        subject: SubjectCategory,
        wc: f64,
    ) -> PairObservation {
        PairObservation {
            y_accuracy: true,
            y_scorediff: Some(0.0),
            doc_type,
            model_name: model.into(),
            framework,
            subject,
            word_count: wc,
            level: GranularityLevel::L5,
        }
    }

    fn spread_observations() -> Vec<PairObservation> {
        let mut v = Vec::new();
        for (i, dt) in DocumentType::ALL.into_iter().enumerate() {
            for (j, fw) in FrameworkKey::ALL.into_iter().enumerate() {
                for (k, s) in SubjectCategory::ALL.into_iter().enumerate() {
                    v.push(obs(
                        dt,
                        if (i + j + k) % 2 == 0 { "gpt-4o" } else { "mock-b" },
                        fw,
                        s,
                        (10 + 7 * i + 3 * j + k) as f64,
                    ));
                }
            }
        }
        v
    }

    #[test]
    fn full_factor_spread_produces_expected_dummies() {
        let design = encode_design(
            &spread_observations(),
            Dependent::Accuracy,
            &EncodeOptions::default(),
        )
        .unwrap();
        let doc_dummies: Vec<_> = design
            .terms
            .iter()
            .filter(|t| t.starts_with("doc_type:"))
            .collect();
        assert_eq!(doc_dummies.len(), 4);
        assert!(!design
            .terms
            .contains(&"doc_type:learning_objective".to_string()));
        assert!(design.terms.contains(&"framework:onet".to_string()));
        assert!(!design.terms.contains(&"framework:eu".to_string()));
        assert!(design.terms.contains(&"model:mock-b".to_string()));
        assert!(!design.terms.contains(&"model:gpt-4o".to_string()));
    }

    #[test]
    fn single_framework_drops_dummies_with_warning() {
        let rows: Vec<_> = spread_observations()
            .into_iter()
            .filter(|o| o.framework == FrameworkKey::Esdc)
            .collect();
        let design =
            encode_design(&rows, Dependent::Accuracy, &EncodeOptions::default()).unwrap();
        assert!(!design.terms.iter().any(|t| t.starts_with("framework:")));
        assert!(design.warnings.iter().any(|w| w.contains("framework")));
        // ESDC became the effective reference.
        assert!(design
            .reference_levels
            .iter()
            .any(|(f, l)| f == "framework" && l == "esdc"));
    }

    #[test]
    fn word_count_column_is_standardized() {
        let design = encode_design(
            &spread_observations(),
            Dependent::Accuracy,
            &EncodeOptions::default(),
        )
        .unwrap();
        let wc_col = design.terms.iter().position(|t| t == "word_count").unwrap();
        let col = design.x.column(wc_col);
        let n = col.len() as f64;
        let mean = col.sum() / n;
        let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 1e-9, "mean {mean}");
        assert!((sd - 1.0).abs() < 1e-9, "sd {sd}");
    }

    #[test]
    fn scorediff_rows_without_value_are_dropped_and_counted() {
        let mut rows = spread_observations();
        rows[0].y_scorediff = None;
        rows[1].y_scorediff = None;
        let design =
            encode_design(&rows, Dependent::ScoreDiff, &EncodeOptions::default()).unwrap();
        assert_eq!(design.n_dropped, 2);
        assert_eq!(design.x.nrows(), rows.len() - 2);
    }

    #[test]
    fn all_rows_dropped_is_an_error() {
        let mut rows = vec![obs(
            DocumentType::LearningObjective,
            "m",
            FrameworkKey::Eu,
            SubjectCategory::Stem,
            5.0,
        )];
        rows[0].y_scorediff = None;
        assert!(matches!(
            encode_design(&rows, Dependent::ScoreDiff, &EncodeOptions::default()),
            Err(RegressionError::EmptyAfterDrop)
        ));
    }
}
