//! Per-slice evaluation reports and their CSV / Markdown renderings.

use std::collections::BTreeMap;
use std::io::Write;

use crate::annotation::AlignmentLabel;
use crate::corpus::DocumentType;
use crate::eval::confusion::ConfusionMatrix;
use crate::eval::granularity::{collapse, score_difference, GranularityLevel};
use crate::eval::icc::{icc_at_level, ICC_VARIANT};
use crate::eval::kappa::{weighted_kappa, WeightScheme};
use crate::eval::mcg::mcg_accuracy;
use crate::framework::FrameworkKey;
use crate::gateway::FailureKind;
use crate::prompt::Strategy;

/// One joined gold/prediction pair feeding an evaluation slice.
#[derive(Debug, Clone)]
pub struct EvalPair {
    pub doc_type: DocumentType,
    pub gold: AlignmentLabel,
    pub pred: AlignmentLabel,
    pub failure: Option<FailureKind>,
}

/// Metric table for one (strategy, model, framework, doc-type-or-all, level)
/// slice.
///
/// Prediction failures evaluate as NA (their substituted label) and are
/// counted separately; `n_no_response` flags slices where the NA-substitution
/// convention is in play.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub strategy: Strategy,
    pub model: String,
    pub framework: FrameworkKey,
    /// `None` means the slice aggregates all document types.
    pub doc_type: Option<DocumentType>,
    pub level: GranularityLevel,
    pub n_pairs: usize,
    pub n_failures: usize,
    pub n_no_response: usize,
    pub n_scorediff_dropped: usize,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_kappa: Option<f64>,
    pub kappa_scheme: WeightScheme,
    pub icc: Option<f64>,
    pub mcg_accuracy: Option<f64>,
    pub mean_score_difference: Option<f64>,
}

/// Compute the metric table for one slice. Returns `None` on an empty slice
/// so reports never carry zero-pair rows.
pub fn evaluate_slice(
    strategy: Strategy,
    model: &str,
    framework: FrameworkKey,
    doc_type: Option<DocumentType>,
    level: GranularityLevel,
    pairs: &[EvalPair],
    scheme: WeightScheme,
) -> Option<EvalReport> {
    if pairs.is_empty() {
        return None;
    }
    let gold: Vec<AlignmentLabel> = pairs.iter().map(|p| p.gold).collect();
    let pred: Vec<AlignmentLabel> = pairs.iter().map(|p| p.pred).collect();

    let cm = ConfusionMatrix::from_labels(&gold, &pred, level).expect("non-empty slice");
    let prf = cm.macro_prf();

    let mut diffs = Vec::new();
    let mut dropped = 0usize;
    for p in pairs {
        match score_difference(p.gold, p.pred, level) {
            Some(d) => diffs.push(d),
            None => dropped += 1,
        }
    }
    let mean_score_difference = if diffs.is_empty() {
        None
    } else {
        Some(diffs.iter().sum::<f64>() / diffs.len() as f64)
    };

    Some(EvalReport {
        strategy,
        model: model.to_string(),
        framework,
        doc_type,
        level,
        n_pairs: pairs.len(),
        n_failures: pairs.iter().filter(|p| p.failure.is_some()).count(),
        n_no_response: pairs
            .iter()
            .filter(|p| p.failure == Some(FailureKind::NoResponse))
            .count(),
        n_scorediff_dropped: dropped,
        accuracy: cm.accuracy(),
        macro_precision: prf.precision,
        macro_recall: prf.recall,
        macro_f1: prf.f1,
        weighted_kappa: weighted_kappa(&gold, &pred, level, scheme).ok(),
        kappa_scheme: scheme,
        icc: icc_at_level(&gold, &pred, level).ok(),
        mcg_accuracy: slice_mcg(pairs, doc_type, level),
        mean_score_difference,
    })
}

/// Majority-class baseline for a slice's gold labels.
///
/// Per-document-type slices use their own gold class distribution; the
/// all-types slice averages the per-type baselines.
fn slice_mcg(
    pairs: &[EvalPair],
    doc_type: Option<DocumentType>,
    level: GranularityLevel,
) -> Option<f64> {
    let mcg_of = |subset: &[&EvalPair]| -> Option<f64> {
        let k = level.class_count();
        let mut counts = vec![0usize; k];
        for p in subset {
            counts[collapse(p.gold, level).code] += 1;
        }
        let total: usize = counts.iter().sum();
        if total == 0 {
            return None;
        }
        let dist: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        mcg_accuracy(&dist).ok()
    };

    if doc_type.is_some() {
        let all: Vec<&EvalPair> = pairs.iter().collect();
        mcg_of(&all)
    } else {
        let mut by_type: BTreeMap<DocumentType, Vec<&EvalPair>> = BTreeMap::new();
        for p in pairs {
            by_type.entry(p.doc_type).or_default().push(p);
        }
        let values: Vec<f64> = by_type.values().filter_map(|v| mcg_of(v)).collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Write reports as one CSV row per slice x level.
pub fn write_eval_csv<W: Write>(reports: &[EvalReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "strategy",
        "model",
        "framework",
        "doc_type",
        "level",
        "n_pairs",
        "n_failures",
        "n_no_response",
        "n_scorediff_dropped",
        "accuracy",
        "macro_precision",
        "macro_recall",
        "macro_f1",
        "weighted_kappa",
        "kappa_weights",
        "icc",
        "icc_variant",
        "mcg_accuracy",
        "mean_score_difference",
    ])?;
    for r in reports {
        w.write_record([
            r.strategy.as_str().to_string(),
            r.model.clone(),
            r.framework.to_string(),
            r.doc_type.map(|d| d.to_string()).unwrap_or_else(|| "all".into()),
            r.level.to_string(),
            r.n_pairs.to_string(),
            r.n_failures.to_string(),
            r.n_no_response.to_string(),
            r.n_scorediff_dropped.to_string(),
            format!("{:.6}", r.accuracy),
            format!("{:.6}", r.macro_precision),
            format!("{:.6}", r.macro_recall),
            format!("{:.6}", r.macro_f1),
            fmt_opt(r.weighted_kappa),
            r.kappa_scheme.as_str().to_string(),
            fmt_opt(r.icc),
            ICC_VARIANT.to_string(),
            fmt_opt(r.mcg_accuracy),
            fmt_opt(r.mean_score_difference),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Render all-document-type slices as Markdown tables, one per
/// (strategy, framework), with rows N_class x model.
pub fn render_markdown(reports: &[EvalReport]) -> String {
    let mut grouped: BTreeMap<(Strategy, FrameworkKey), Vec<&EvalReport>> = BTreeMap::new();
    for r in reports.iter().filter(|r| r.doc_type.is_none()) {
        grouped.entry((r.strategy, r.framework)).or_default().push(r);
    }
    let mut out = String::new();
    out.push_str("# Evaluation summary\n");
    let mut any_no_response = false;
    for ((strategy, framework), mut rows) in grouped {
        rows.sort_by(|a, b| {
            b.level
                .class_count()
                .cmp(&a.level.class_count())
                .then_with(|| a.model.cmp(&b.model))
        });
        out.push_str(&format!(
            "\n## Strategy {} / framework {}\n\n",
            strategy.as_str(),
            framework
        ));
        out.push_str("| N_class | Model | Kappa | ICC | Accuracy | Precision | Recall | F1 |\n");
        out.push_str("|---|---|---|---|---|---|---|---|\n");
        for r in rows {
            if r.n_no_response > 0 {
                any_no_response = true;
            }
            out.push_str(&format!(
                "| {} | {} | {} | {} | {:.3} | {:.3} | {:.3} | {:.3} |\n",
                r.level.class_count(),
                r.model,
                r.weighted_kappa
                    .map(|v| format!("{v:.3}"))
                    .unwrap_or_else(|| "-".into()),
                r.icc.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into()),
                r.accuracy,
                r.macro_precision,
                r.macro_recall,
                r.macro_f1,
            ));
        }
    }
    out.push_str("\nNotes: kappa uses ");
    out.push_str(
        reports
            .first()
            .map(|r| r.kappa_scheme.as_str())
            .unwrap_or("quadratic"),
    );
    out.push_str(" disagreement weights with NA as a fifth category at the 5-level; ICC variant is ");
    out.push_str(ICC_VARIANT);
    out.push_str(
        " over scored pairs (NA pairs excluded at the 5-level); macro metrics average over \
         classes observed in gold or predictions.\n",
    );
    if any_no_response {
        out.push_str(
            "Some slices contain non-responses; those predictions are scored as NA and the \
             counts are reported in the CSV.\n",
        );
    }
    out
}
