//! Joining predictions with gold annotations and deriving evaluation
//! reports and regression observations.

use std::collections::BTreeMap;

use crate::annotation::{AlignmentLabel, AnnotationRecord, Round, CONSENSUS_ANNOTATOR};
use crate::corpus::{CurriculumDocument, DocumentType, SubjectCategory};
use crate::eval::{
    collapse, evaluate_slice, score_difference, EvalPair, EvalReport, GranularityLevel,
    WeightScheme,
};
use crate::framework::FrameworkKey;
use crate::pipeline::records::PredictionRecord;
use crate::prompt::Strategy;
use crate::regression::PairObservation;

/// Key identifying one (document, competency) pair.
pub type PairKey = (String, DocumentType, FrameworkKey, String);

/// Gold labels from final-round annotations.
///
/// Adjudicated consensus labels win; otherwise the lexicographically first
/// annotator's label is used, which keeps the choice deterministic when two
/// annotators both have final records.
pub fn gold_labels(records: &[AnnotationRecord]) -> BTreeMap<PairKey, AlignmentLabel> {
    let mut best: BTreeMap<PairKey, (String, AlignmentLabel)> = BTreeMap::new();
    for rec in records.iter().filter(|r| r.round == Round::Final) {
        let key: PairKey = (
            rec.course_id.clone(),
            rec.doc_type,
            rec.framework,
            rec.competency_id.clone(),
        );
        let preferred = match best.get(&key) {
            None => true,
            Some((current, _)) => {
                if rec.annotator_id == CONSENSUS_ANNOTATOR {
                    current != CONSENSUS_ANNOTATOR
                } else {
                    current != CONSENSUS_ANNOTATOR && rec.annotator_id < *current
                }
            }
        };
        if preferred {
            best.insert(key, (rec.annotator_id.clone(), rec.label));
        }
    }
    best.into_iter().map(|(k, (_, label))| (k, label)).collect()
}

/// A prediction joined with its gold label.
#[derive(Debug, Clone)]
pub struct JoinedPair {
    pub record: PredictionRecord,
    pub gold: AlignmentLabel,
}

/// Join predictions with gold labels; predictions without a matching gold
/// pair are returned separately so runs can report the gap.
pub fn join_predictions(
    predictions: &[PredictionRecord],
    gold: &BTreeMap<PairKey, AlignmentLabel>,
) -> (Vec<JoinedPair>, usize) {
    let mut joined = Vec::with_capacity(predictions.len());
    let mut unmatched = 0usize;
    for record in predictions {
        let key: PairKey = (
            record.course_id.clone(),
            record.doc_type,
            record.framework,
            record.competency_id.clone(),
        );
        match gold.get(&key) {
            Some(&gold_label) => joined.push(JoinedPair {
                record: record.clone(),
                gold: gold_label,
            }),
            None => unmatched += 1,
        }
    }
    (joined, unmatched)
}

/// Build every evaluation report: per (strategy, model, framework), one
/// slice per present document type plus the all-types aggregate, each at
/// every requested level. Excluded document types are filtered out first.
pub fn build_eval_reports(
    joined: &[JoinedPair],
    levels: &[GranularityLevel],
    scheme: WeightScheme,
    exclude_doc_types: &[DocumentType],
) -> Vec<EvalReport> {
    let kept: Vec<&JoinedPair> = joined
        .iter()
        .filter(|j| !exclude_doc_types.contains(&j.record.doc_type))
        .collect();

    let mut groups: BTreeMap<(Strategy, String, FrameworkKey), Vec<&JoinedPair>> = BTreeMap::new();
    for j in &kept {
        groups
            .entry((
                j.record.strategy,
                j.record.model_name.clone(),
                j.record.framework,
            ))
            .or_default()
            .push(j);
    }

    let mut reports = Vec::new();
    for ((strategy, model, framework), members) in groups {
        let mut doc_types: Vec<DocumentType> =
            members.iter().map(|j| j.record.doc_type).collect();
        doc_types.sort_unstable();
        doc_types.dedup();

        let mut slices: Vec<Option<DocumentType>> =
            doc_types.iter().copied().map(Some).collect();
        slices.push(None);

        for doc_type in slices {
            let pairs: Vec<EvalPair> = members
                .iter()
                .filter(|j| doc_type.is_none() || Some(j.record.doc_type) == doc_type)
                .map(|j| EvalPair {
                    doc_type: j.record.doc_type,
                    gold: j.gold,
                    pred: j.record.label,
                    failure: j.record.failure,
                })
                .collect();
            for &level in levels {
                if let Some(report) =
                    evaluate_slice(strategy, &model, framework, doc_type, level, &pairs, scheme)
                {
                    reports.push(report);
                }
            }
        }
    }

    reports.sort_by(|a, b| {
        let key = |r: &EvalReport| {
            (
                r.strategy.as_str(),
                r.model.clone(),
                r.framework.as_str(),
                r.doc_type.map(|d| d.as_str()).unwrap_or("all"),
                std::cmp::Reverse(r.level.class_count()),
            )
        };
        key(a).cmp(&key(b))
    });
    reports
}

/// Course metadata needed by the regressions, keyed by (course, doc type).
pub fn document_metadata(
    docs: &[CurriculumDocument],
) -> BTreeMap<(String, DocumentType), (SubjectCategory, f64)> {
    docs.iter()
        .map(|d| {
            (
                (d.course_id.clone(), d.doc_type),
                (d.subject, d.word_count as f64),
            )
        })
        .collect()
}

/// Build regression observations at every requested level from the joined
/// pairs of one strategy.
pub fn build_pair_observations(
    joined: &[JoinedPair],
    strategy: Strategy,
    metadata: &BTreeMap<(String, DocumentType), (SubjectCategory, f64)>,
    levels: &[GranularityLevel],
    exclude_doc_types: &[DocumentType],
) -> Vec<PairObservation> {
    let mut observations = Vec::new();
    for j in joined.iter().filter(|j| {
        j.record.strategy == strategy && !exclude_doc_types.contains(&j.record.doc_type)
    }) {
        let Some(&(subject, word_count)) =
            metadata.get(&(j.record.course_id.clone(), j.record.doc_type))
        else {
            continue;
        };
        for &level in levels {
            let gold_code = collapse(j.gold, level).code;
            let pred_code = collapse(j.record.label, level).code;
            observations.push(PairObservation {
                y_accuracy: gold_code == pred_code,
                y_scorediff: score_difference(j.gold, j.record.label, level),
                doc_type: j.record.doc_type,
                model_name: j.record.model_name.clone(),
                framework: j.record.framework,
                subject,
                word_count,
                level,
            });
        }
    }
    observations
}
