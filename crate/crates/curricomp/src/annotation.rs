//! Human annotation records, inter-rater reliability, and NA-rate audits.
//!
//! The rubric label attaches to a (document, competency) pair and is shared by
//! human annotations and model predictions; only the record source differs.
//! Scores 3..0 are ordinal; NA ("may be relevant, but there is insufficient
//! information to determine its presence") is deliberately distinct from 0
//! (clearly unrelated) and carries no numeric value.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DocumentType;
use crate::framework::FrameworkKey;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("failed to read annotation file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed annotation file: {0}")]
    Csv(#[from] csv::Error),
    #[error("duplicate annotation for ({course_id}, {doc_type}, {framework}, {competency_id}, {annotator_id}, {round:?})")]
    Duplicate {
        course_id: String,
        doc_type: DocumentType,
        framework: FrameworkKey,
        competency_id: String,
        annotator_id: String,
        round: Round,
    },
    #[error("label lists must be aligned and non-empty (got {0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("agreement is undefined when both raters use a single shared category")]
    DegenerateAgreement,
    #[error("fraction must be in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("NA-rate audit expects final-round records only")]
    NonFinalRecords,
}

/// The five-way alignment rubric label.
///
/// `S3` explicit, `S2` reasonably inferred, `S1` vaguely implied, `S0`
/// unrelated, `Na` insufficient information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AlignmentLabel {
    #[serde(rename = "3")]
    S3,
    #[serde(rename = "2")]
    S2,
    #[serde(rename = "1")]
    S1,
    #[serde(rename = "0")]
    S0,
    #[serde(rename = "NA")]
    Na,
}

impl AlignmentLabel {
    /// All labels in ascending ordinal order, NA last.
    pub const ALL: [AlignmentLabel; 5] = [
        AlignmentLabel::S0,
        AlignmentLabel::S1,
        AlignmentLabel::S2,
        AlignmentLabel::S3,
        AlignmentLabel::Na,
    ];

    /// Ordinal value for scored labels; NA has none.
    pub fn numeric_value(self) -> Option<f64> {
        match self {
            AlignmentLabel::S3 => Some(3.0),
            AlignmentLabel::S2 => Some(2.0),
            AlignmentLabel::S1 => Some(1.0),
            AlignmentLabel::S0 => Some(0.0),
            AlignmentLabel::Na => None,
        }
    }

    /// Index into [`AlignmentLabel::ALL`].
    pub fn index(self) -> usize {
        match self {
            AlignmentLabel::S0 => 0,
            AlignmentLabel::S1 => 1,
            AlignmentLabel::S2 => 2,
            AlignmentLabel::S3 => 3,
            AlignmentLabel::Na => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AlignmentLabel::S3 => "3",
            AlignmentLabel::S2 => "2",
            AlignmentLabel::S1 => "1",
            AlignmentLabel::S0 => "0",
            AlignmentLabel::Na => "NA",
        }
    }

    pub fn parse(s: &str) -> Option<AlignmentLabel> {
        match s.trim() {
            "3" => Some(AlignmentLabel::S3),
            "2" => Some(AlignmentLabel::S2),
            "1" => Some(AlignmentLabel::S1),
            "0" => Some(AlignmentLabel::S0),
            "NA" | "na" | "Na" => Some(AlignmentLabel::Na),
            _ => None,
        }
    }
}

impl fmt::Display for AlignmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Annotation round. Calibration rounds feed reliability work; final rounds
/// feed evaluation and audits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Round {
    Calibration,
    Final,
}

/// One annotator's rubric label for one (document, competency) pair.
///
/// Adjudicated post-discussion labels are stored under the reserved
/// annotator id `"consensus"` rather than overwriting the originals, so
/// reliability statistics stay recomputable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub course_id: String,
    pub doc_type: DocumentType,
    pub framework: FrameworkKey,
    pub competency_id: String,
    pub annotator_id: String,
    pub round: Round,
    pub label: AlignmentLabel,
}

/// Annotator id reserved for adjudicated labels.
pub const CONSENSUS_ANNOTATOR: &str = "consensus";

/// Load annotation records, rejecting duplicates of the record key.
pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationRecord>, AnnotationError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for row in reader.deserialize::<AnnotationRecord>() {
        let rec = row?;
        let key = (
            rec.course_id.clone(),
            rec.doc_type,
            rec.framework,
            rec.competency_id.clone(),
            rec.annotator_id.clone(),
            rec.round,
        );
        if !seen.insert(key) {
            return Err(AnnotationError::Duplicate {
                course_id: rec.course_id,
                doc_type: rec.doc_type,
                framework: rec.framework,
                competency_id: rec.competency_id,
                annotator_id: rec.annotator_id,
                round: rec.round,
            });
        }
        records.push(rec);
    }
    Ok(records)
}

/// Write annotation records as CSV.
pub fn write_annotations(
    path: &Path,
    records: &[AnnotationRecord],
) -> Result<(), AnnotationError> {
    let mut writer = csv::Writer::from_path(path)?;
    for rec in records {
        writer.serialize(rec)?;
    }
    writer.flush()?;
    Ok(())
}

/// Unweighted Cohen's kappa over the five rubric categories.
///
/// kappa = (p_o - p_e) / (1 - p_e). When expected agreement is 1 (both lists
/// constant on one shared category) the statistic is undefined and reported
/// as [`AnnotationError::DegenerateAgreement`], never as 1.
pub fn cohen_kappa(a: &[AlignmentLabel], b: &[AlignmentLabel]) -> Result<f64, AnnotationError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(AnnotationError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len() as f64;
    let observed = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let mut expected = 0.0;
    for label in AlignmentLabel::ALL {
        let pa = a.iter().filter(|&&x| x == label).count() as f64 / n;
        let pb = b.iter().filter(|&&x| x == label).count() as f64 / n;
        expected += pa * pb;
    }
    if (1.0 - expected).abs() < 1e-12 {
        return Err(AnnotationError::DegenerateAgreement);
    }
    Ok((observed - expected) / (1.0 - expected))
}

/// Deterministic uniform sample of ceil(fraction * n) records for periodic
/// cross-checking between annotators.
pub fn cross_check_sample(
    records: &[AnnotationRecord],
    fraction: f64,
    seed: u64,
) -> Result<Vec<AnnotationRecord>, AnnotationError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(AnnotationError::InvalidFraction(fraction));
    }
    let n = records.len();
    let take = ((fraction * n as f64).ceil() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, n, take).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| records[i].clone()).collect())
}

/// NA fraction for one (framework, document type) group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NaRateRow {
    pub framework: FrameworkKey,
    pub doc_type: DocumentType,
    pub na_count: usize,
    pub total: usize,
    pub na_fraction: f64,
}

/// Fraction of NA labels per (framework, document type) group.
///
/// Groups with no records are simply absent; rates are never NaN. Input must
/// be final-round records.
pub fn na_rate(records: &[AnnotationRecord]) -> Result<Vec<NaRateRow>, AnnotationError> {
    if records.iter().any(|r| r.round != Round::Final) {
        return Err(AnnotationError::NonFinalRecords);
    }
    let mut groups: BTreeMap<(FrameworkKey, DocumentType), (usize, usize)> = BTreeMap::new();
    for rec in records {
        let entry = groups.entry((rec.framework, rec.doc_type)).or_insert((0, 0));
        entry.1 += 1;
        if rec.label == AlignmentLabel::Na {
            entry.0 += 1;
        }
    }
    Ok(groups
        .into_iter()
        .map(|((framework, doc_type), (na_count, total))| NaRateRow {
            framework,
            doc_type,
            na_count,
            total,
            na_fraction: na_count as f64 / total as f64,
        })
        .collect())
}

/// Per-framework disagreement summary between two annotators.
///
/// Carries the full 5x5 confusion matrix (rows = first annotator, columns =
/// second, both in `AlignmentLabel::ALL` order) plus the 0-vs-NA cell count,
/// the cell calibration discussions tend to hinge on.
#[derive(Debug, Clone)]
pub struct DisagreementReport {
    pub framework: FrameworkKey,
    pub n_pairs: usize,
    pub kappa: Option<f64>,
    pub confusion: [[usize; 5]; 5],
    pub zero_vs_na: usize,
}

/// Build per-framework disagreement reports for a pair of annotators within
/// one round. Pairs are aligned on (course, doc type, framework, competency);
/// keys missing either annotator are skipped.
pub fn disagreement_reports(
    records: &[AnnotationRecord],
    annotator_a: &str,
    annotator_b: &str,
    round: Round,
) -> Vec<DisagreementReport> {
    type PairKey = (FrameworkKey, String, DocumentType, String);
    type LabelPair = (Option<AlignmentLabel>, Option<AlignmentLabel>);
    let mut by_key: BTreeMap<PairKey, LabelPair> = BTreeMap::new();
    for rec in records.iter().filter(|r| r.round == round) {
        let slot = if rec.annotator_id == annotator_a {
            0
        } else if rec.annotator_id == annotator_b {
            1
        } else {
            continue;
        };
        let key = (
            rec.framework,
            rec.course_id.clone(),
            rec.doc_type,
            rec.competency_id.clone(),
        );
        let entry = by_key.entry(key).or_insert((None, None));
        if slot == 0 {
            entry.0 = Some(rec.label);
        } else {
            entry.1 = Some(rec.label);
        }
    }

    let mut per_framework: BTreeMap<FrameworkKey, (Vec<AlignmentLabel>, Vec<AlignmentLabel>)> =
        BTreeMap::new();
    for ((framework, ..), (a, b)) in by_key {
        if let (Some(a), Some(b)) = (a, b) {
            let entry = per_framework.entry(framework).or_default();
            entry.0.push(a);
            entry.1.push(b);
        }
    }

    per_framework
        .into_iter()
        .map(|(framework, (a, b))| {
            let mut confusion = [[0usize; 5]; 5];
            for (x, y) in a.iter().zip(&b) {
                confusion[x.index()][y.index()] += 1;
            }
            let zero_vs_na = confusion[AlignmentLabel::S0.index()][AlignmentLabel::Na.index()]
                + confusion[AlignmentLabel::Na.index()][AlignmentLabel::S0.index()];
            DisagreementReport {
                framework,
                n_pairs: a.len(),
                kappa: cohen_kappa(&a, &b).ok(),
                confusion,
                zero_vs_na,
            }
        })
        .collect()
}

/// One row of the transcribed rubric-score distribution fixture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreDistRow {
    pub framework: FrameworkKey,
    pub doc_type: DocumentType,
    pub label: AlignmentLabel,
    pub count: usize,
}

/// Parse a score-distribution counts file (framework, doc_type, label, count).
pub fn load_score_distribution(path: &Path) -> Result<Vec<ScoreDistRow>, AnnotationError> {
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.deserialize().collect::<Result<Vec<_>, _>>()?)
}

/// The bundled score-distribution fixture.
pub fn bundled_score_distribution() -> Vec<ScoreDistRow> {
    let text = include_str!("../fixtures/score_distribution.csv");
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize()
        .collect::<Result<Vec<_>, _>>()
        .expect("bundled score distribution parses")
}

/// Expand distribution counts into synthetic final-round annotation records,
/// one per counted pair, for audits that operate on record streams.
pub fn expand_distribution(rows: &[ScoreDistRow]) -> Vec<AnnotationRecord> {
    let mut records = Vec::new();
    for row in rows {
        for i in 0..row.count {
            records.push(AnnotationRecord {
                course_id: format!("dist-{}-{}-{}", row.framework, row.doc_type, i),
                doc_type: row.doc_type,
                framework: row.framework,
                competency_id: "aggregate".into(),
                annotator_id: "distribution".into(),
                round: Round::Final,
                label: row.label,
            });
        }
    }
    records
}

/// Per-label probabilities for one (framework, doc type) group of the
/// distribution, in `AlignmentLabel::ALL` order ending with NA.
pub fn distribution_probabilities(
    rows: &[ScoreDistRow],
    framework: FrameworkKey,
    doc_type: DocumentType,
) -> Option<[f64; 5]> {
    let mut counts = [0usize; 5];
    let mut any = false;
    for row in rows
        .iter()
        .filter(|r| r.framework == framework && r.doc_type == doc_type)
    {
        counts[row.label.index()] += row.count;
        any = true;
    }
    if !any {
        return None;
    }
    let total: usize = counts.iter().sum();
    let mut probs = [0.0; 5];
    for (p, &c) in probs.iter_mut().zip(&counts) {
        *p = c as f64 / total as f64;
    }
    Some(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use AlignmentLabel::*;

    #[test]
    fn kappa_perfect_agreement_is_one() {
        let a = vec![S3, S2, S0, Na, S1];
        let k = cohen_kappa(&a, &a).unwrap();
        assert!((k - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_total_disagreement_is_minus_one() {
        let a = vec![S3, S3, S0, S0];
        let b = vec![S0, S0, S3, S3];
        let k = cohen_kappa(&a, &b).unwrap();
        assert!((k + 1.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_chance_level_is_zero() {
        let a = vec![S3, S0, S3, S0];
        let b = vec![S3, S0, S0, S3];
        let k = cohen_kappa(&a, &b).unwrap();
        assert!(k.abs() < 1e-12);
    }

    #[test]
    fn kappa_degenerate_single_category_is_undefined() {
        let a = vec![S2, S2, S2];
        let err = cohen_kappa(&a, &a).unwrap_err();
        assert!(matches!(err, AnnotationError::DegenerateAgreement));
    }

    fn record(
        course: &str,
        framework: FrameworkKey,
        annotator: &str,
        round: Round,
        label: AlignmentLabel,
    ) -> AnnotationRecord {
        AnnotationRecord {
            course_id: course.into(),
            doc_type: DocumentType::LearningObjective,
            framework,
            competency_id: "writing".into(),
            annotator_id: annotator.into(),
            round,
            label,
        }
    }

    #[test]
    fn cross_check_takes_ceil_of_fraction() {
        let records: Vec<_> = (0..200)
            .map(|i| record(&format!("C{i}"), FrameworkKey::Eu, "a1", Round::Final, S2))
            .collect();
        let sample = cross_check_sample(&records, 0.10, 3).unwrap();
        assert_eq!(sample.len(), 20);
        let all = cross_check_sample(&records, 1.0, 3).unwrap();
        assert_eq!(all.len(), 200);
        let again = cross_check_sample(&records, 0.10, 3).unwrap();
        assert_eq!(sample, again);
    }

    #[test]
    fn cross_check_rejects_bad_fraction() {
        let records = vec![record("C1", FrameworkKey::Eu, "a1", Round::Final, S2)];
        assert!(cross_check_sample(&records, 0.0, 1).is_err());
        assert!(cross_check_sample(&records, 1.5, 1).is_err());
    }

    #[test]
    fn na_rate_on_distribution_fixture_matches_reported_values() {
        let rows = bundled_score_distribution();
        let records = expand_distribution(&rows);
        let rates = na_rate(&records).unwrap();
        let get = |fw, dt| {
            rates
                .iter()
                .find(|r| r.framework == fw && r.doc_type == dt)
                .unwrap()
                .na_fraction
        };
        let onet_sched = get(FrameworkKey::Onet, DocumentType::InstructionalSchedule);
        assert!((onet_sched - 0.450).abs() < 0.001, "got {onet_sched}");
        let eu_sched = get(FrameworkKey::Eu, DocumentType::InstructionalSchedule);
        assert!((eu_sched - 0.266).abs() < 0.001, "got {eu_sched}");
    }

    #[test]
    fn na_rate_zero_when_group_has_no_na() {
        let records = vec![
            record("C1", FrameworkKey::Eu, "a1", Round::Final, S2),
            record("C2", FrameworkKey::Eu, "a1", Round::Final, S3),
        ];
        let rates = na_rate(&records).unwrap();
        assert_eq!(rates.len(), 1);
        assert_eq!(rates[0].na_fraction, 0.0);
    }

    #[test]
    fn na_rate_rejects_calibration_records() {
        let records = vec![record("C1", FrameworkKey::Eu, "a1", Round::Calibration, S2)];
        assert!(matches!(
            na_rate(&records),
            Err(AnnotationError::NonFinalRecords)
        ));
    }

    #[test]
    fn label_rates_sum_to_one_per_group() {
        let rows = bundled_score_distribution();
        for fw in FrameworkKey::ALL {
            for dt in DocumentType::ALL {
                let probs = distribution_probabilities(&rows, fw, dt).unwrap();
                let sum: f64 = probs.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn disagreement_report_counts_zero_vs_na_cell() {
        let mut records = Vec::new();
        let labels_a = [S0, S0, Na, S2];
        let labels_b = [Na, S0, S0, S2];
        for (i, (&la, &lb)) in labels_a.iter().zip(&labels_b).enumerate() {
            let mut ra = record(&format!("C{i}"), FrameworkKey::Esdc, "a1", Round::Calibration, la);
            ra.competency_id = format!("comp-{i}");
            let mut rb = record(&format!("C{i}"), FrameworkKey::Esdc, "a2", Round::Calibration, lb);
            rb.competency_id = format!("comp-{i}");
            records.push(ra);
            records.push(rb);
        }
        let reports = disagreement_reports(&records, "a1", "a2", Round::Calibration);
        assert_eq!(reports.len(), 1);
        let r = &reports[0];
        assert_eq!(r.n_pairs, 4);
        assert_eq!(r.zero_vs_na, 2);
        assert_eq!(r.confusion[S2.index()][S2.index()], 1);
    }

    proptest! {
        #[test]
        fn kappa_is_symmetric_and_bounded(
            pairs in proptest::collection::vec((0usize..5, 0usize..5), 2..40)
        ) {
            let a: Vec<_> = pairs.iter().map(|&(x, _)| AlignmentLabel::ALL[x]).collect();
            let b: Vec<_> = pairs.iter().map(|&(_, y)| AlignmentLabel::ALL[y]).collect();
            if let Ok(k_ab) = cohen_kappa(&a, &b) {
                let k_ba = cohen_kappa(&b, &a).unwrap();
                prop_assert!((k_ab - k_ba).abs() < 1e-12);
                prop_assert!(k_ab <= 1.0 + 1e-12);
                if a == b {
                    prop_assert!((k_ab - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
