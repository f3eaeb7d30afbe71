//! Heterogeneity regressions: linear models of prediction accuracy and score
//! difference over document type, length, model, framework, and subject.
//!
//! The accuracy outcome is binary and fit as a linear probability model, so
//! coefficients read as additive changes in the probability of exact
//! agreement relative to the reference categories. Standard errors are
//! classical (homoskedastic); reports note this as a limitation.

mod design;
mod ols;

pub use design::{encode_design, Dependent, DesignMatrix, EncodeOptions, PairObservation};
pub use ols::{fit_ols, significance_stars, OlsFit};

use std::io::Write;

use thiserror::Error;

use crate::eval::GranularityLevel;

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("no observations to encode")]
    EmptyObservations,
    #[error("all rows dropped: the dependent variable is undefined everywhere")]
    EmptyAfterDrop,
    #[error("need more rows than parameters ({rows} rows, {cols} columns)")]
    InsufficientObservations { rows: usize, cols: usize },
    #[error("design matrix is rank deficient")]
    SingularMatrix,
}

/// Per-term statistics of one fitted model.
#[derive(Debug, Clone)]
pub struct TermStats {
    pub term: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub stars: &'static str,
}

/// One fitted heterogeneity regression with its encoding metadata.
#[derive(Debug, Clone)]
pub struct RegressionResult {
    pub level: GranularityLevel,
    pub dependent: Dependent,
    pub terms: Vec<TermStats>,
    pub adjusted_r2: f64,
    pub n_obs: usize,
    pub n_dropped: usize,
    pub reference_levels: Vec<(String, String)>,
    pub warnings: Vec<String>,
    pub standardized_word_count: bool,
}

impl RegressionResult {
    pub fn estimate(&self, term: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.term == term).map(|t| t.estimate)
    }

    pub fn term(&self, term: &str) -> Option<&TermStats> {
        self.terms.iter().find(|t| t.term == term)
    }

    /// Serialize as CSV (term, estimate, std_error, t, p, stars).
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["term", "estimate", "std_error", "t", "p", "stars"])?;
        for t in &self.terms {
            w.write_record([
                t.term.clone(),
                format!("{:.6}", t.estimate),
                format!("{:.6}", t.std_error),
                format!("{:.6}", t.t_stat),
                format!("{:.6}", t.p_value),
                t.stars.to_string(),
            ])?;
        }
        w.write_record([
            "adjusted_r2".to_string(),
            format!("{:.6}", self.adjusted_r2),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Encode and fit one (level, dependent) regression over pair observations.
///
/// Records are filtered to the requested level first, so callers can hand in
/// the full pair table.
pub fn run_eq1(
    records: &[PairObservation],
    level: GranularityLevel,
    dependent: Dependent,
    opts: &EncodeOptions,
) -> Result<RegressionResult, RegressionError> {
    let at_level: Vec<PairObservation> = records
        .iter()
        .filter(|o| o.level == level)
        .cloned()
        .collect();
    let design = encode_design(&at_level, dependent, opts)?;
    let fit = fit_ols(&design.x, &design.y)?;
    let terms = design
        .terms
        .iter()
        .enumerate()
        .map(|(j, term)| TermStats {
            term: term.clone(),
            estimate: fit.estimates[j],
            std_error: fit.std_errors[j],
            t_stat: fit.t_stats[j],
            p_value: fit.p_values[j],
            stars: significance_stars(fit.p_values[j]),
        })
        .collect();
    Ok(RegressionResult {
        level,
        dependent,
        terms,
        adjusted_r2: fit.adjusted_r2,
        n_obs: fit.n_obs,
        n_dropped: design.n_dropped,
        reference_levels: design.reference_levels,
        warnings: design.warnings,
        standardized_word_count: design.standardized_word_count,
    })
}

/// Render fitted models as a Markdown table with terms as rows and
/// level x dependent combinations as columns.
pub fn render_markdown(results: &[&RegressionResult]) -> String {
    let mut out = String::new();
    out.push_str("# Heterogeneity regressions\n\n");
    if results.is_empty() {
        return out;
    }

    let mut term_order: Vec<String> = Vec::new();
    for r in results {
        for t in &r.terms {
            if !term_order.contains(&t.term) {
                term_order.push(t.term.clone());
            }
        }
    }

    out.push_str("| Term |");
    for r in results {
        out.push_str(&format!(
            " {} {} |",
            r.dependent.as_str(),
            r.level.as_str()
        ));
    }
    out.push('\n');
    out.push_str("|---|");
    for _ in results {
        out.push_str("---|");
    }
    out.push('\n');
    for term in &term_order {
        out.push_str(&format!("| {term} |"));
        for r in results {
            match r.term(term) {
                Some(t) => out.push_str(&format!(" {:.3}{} |", t.estimate, t.stars)),
                None => out.push_str(" - |"),
            }
        }
        out.push('\n');
    }
    out.push_str("| Adjusted R² |");
    for r in results {
        out.push_str(&format!(" {:.4} |", r.adjusted_r2));
    }
    out.push('\n');

    let first = results[0];
    out.push_str("\nReference categories: ");
    out.push_str(
        &first
            .reference_levels
            .iter()
            .map(|(f, l)| format!("{f}={l}"))
            .collect::<Vec<_>>()
            .join(", "),
    );
    out.push_str(". Word count is ");
    out.push_str(if first.standardized_word_count {
        "standardized (zero mean, unit variance)"
    } else {
        "on its raw scale"
    });
    out.push_str(
        ". Standard errors are classical (homoskedastic). Stars: p<0.10 (·), p<0.05 (*), \
         p<0.01 (**), p<0.001 (***).\n",
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DocumentType, SubjectCategory};
    use crate::framework::FrameworkKey;

    fn observations() -> Vec<PairObservation> {
        // Full factorial over 5 doc types x 3 frameworks x 4 subjects x
        // 2 models, word count scrambled so no column is collinear.
        let mut v = Vec::new();
        for level in GranularityLevel::ALL {
            for i in 0..120usize {
                v.push(PairObservation {
                    y_accuracy: (i * 7) % 3 == 0,
                    y_scorediff: if level == GranularityLevel::L5 && i % 4 == 0 {
                        None
                    } else {
                        Some(((i * 11) % 5) as f64 - 2.0)
                    },
                    doc_type: DocumentType::ALL[i % 5],
                    framework: FrameworkKey::ALL[(i / 5) % 3],
                    subject: SubjectCategory::ALL[(i / 15) % 4],
                    model_name: if (i / 60) % 2 == 0 { "gpt-4o" } else { "mock-b" }.into(),
                    word_count: (20 + (i * 37) % 53) as f64,
                    level,
                });
            }
        }
        v
    }

    #[test]
    fn eight_fits_cover_levels_and_dependents() {
        let records = observations();
        let opts = EncodeOptions::default();
        let mut fitted = Vec::new();
        for level in GranularityLevel::ALL {
            for dependent in [Dependent::Accuracy, Dependent::ScoreDiff] {
                let r = run_eq1(&records, level, dependent, &opts).unwrap();
                assert_eq!(r.level, level);
                assert_eq!(r.dependent, dependent);
                fitted.push(r);
            }
        }
        assert_eq!(fitted.len(), 8);
        // Score difference is always defined below the 5-level.
        let l2_scorediff = fitted
            .iter()
            .find(|r| r.level == GranularityLevel::L2 && r.dependent == Dependent::ScoreDiff)
            .unwrap();
        assert_eq!(l2_scorediff.n_dropped, 0);
        let l5_scorediff = fitted
            .iter()
            .find(|r| r.level == GranularityLevel::L5 && r.dependent == Dependent::ScoreDiff)
            .unwrap();
        assert!(l5_scorediff.n_dropped > 0);
    }

    #[test]
    fn single_model_drops_model_dummies() {
        let mut records = observations();
        for r in &mut records {
            r.model_name = "only-model".into();
        }
        let result = run_eq1(
            &records,
            GranularityLevel::L3,
            Dependent::Accuracy,
            &EncodeOptions::default(),
        )
        .unwrap();
        assert!(!result.terms.iter().any(|t| t.term.starts_with("model:")));
        assert!(result.terms.iter().any(|t| t.term.starts_with("doc_type:")));
    }

    #[test]
    fn csv_lists_all_terms_and_adjusted_r2() {
        let result = run_eq1(
            &observations(),
            GranularityLevel::L2,
            Dependent::Accuracy,
            &EncodeOptions::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        result.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("intercept"));
        assert!(text.contains("adjusted_r2"));
    }
}
