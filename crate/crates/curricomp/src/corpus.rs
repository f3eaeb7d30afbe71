//! Curriculum document ingestion and stratified sampling.
//!
//! A corpus file is a delimited table (CSV, or JSON-lines with the same field
//! names) of course documents. Each record carries the course metadata needed
//! downstream: subject category for stratification and regression controls,
//! and a derived whitespace word count for length terciles.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read corpus file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed corpus file: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed corpus line {line}: {source}")]
    JsonLine {
        line: usize,
        source: serde_json::Error,
    },
    #[error("document {0:?} has empty text")]
    EmptyText(String),
    #[error("duplicate document key ({0:?}, {1})")]
    DuplicateKey(String, DocumentType),
    #[error("sample size {requested} exceeds corpus size {available}")]
    InsufficientDocuments { requested: usize, available: usize },
    #[error("stratified sampling requires documents of a single type, found {0} and {1}")]
    MixedDocTypes(DocumentType, DocumentType),
    #[error("cannot sample from an empty corpus")]
    EmptyCorpus,
}

/// The five curriculum document types.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum DocumentType {
    ConciseCourseDescription,
    DetailedCourseDescription,
    LearningObjective,
    InstructionalSchedule,
    LearningActivityContent,
}

impl DocumentType {
    pub const ALL: [DocumentType; 5] = [
        DocumentType::ConciseCourseDescription,
        DocumentType::DetailedCourseDescription,
        DocumentType::LearningObjective,
        DocumentType::InstructionalSchedule,
        DocumentType::LearningActivityContent,
    ];

    /// Stable snake_case token used in files and CLI flags.
    pub fn as_str(self) -> &'static str {
        match self {
            DocumentType::ConciseCourseDescription => "concise_course_description",
            DocumentType::DetailedCourseDescription => "detailed_course_description",
            DocumentType::LearningObjective => "learning_objective",
            DocumentType::InstructionalSchedule => "instructional_schedule",
            DocumentType::LearningActivityContent => "learning_activity_content",
        }
    }

    /// Human-readable label for report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            DocumentType::ConciseCourseDescription => "Concise course description",
            DocumentType::DetailedCourseDescription => "Detailed course description",
            DocumentType::LearningObjective => "Learning objective",
            DocumentType::InstructionalSchedule => "Instructional schedule",
            DocumentType::LearningActivityContent => "Learning activity content",
        }
    }

    pub fn parse(s: &str) -> Option<DocumentType> {
        DocumentType::ALL
            .into_iter()
            .find(|d| d.as_str() == s.trim().to_ascii_lowercase())
    }
}

impl fmt::Display for DocumentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Coarse disciplinary grouping used for stratification and as a regression
/// control.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum SubjectCategory {
    Stem,
    HumanitiesSocialSciences,
    AppliedDisciplines,
    OtherInterdisciplinary,
}

impl SubjectCategory {
    pub const ALL: [SubjectCategory; 4] = [
        SubjectCategory::Stem,
        SubjectCategory::HumanitiesSocialSciences,
        SubjectCategory::AppliedDisciplines,
        SubjectCategory::OtherInterdisciplinary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SubjectCategory::Stem => "stem",
            SubjectCategory::HumanitiesSocialSciences => "humanities_social_sciences",
            SubjectCategory::AppliedDisciplines => "applied_disciplines",
            SubjectCategory::OtherInterdisciplinary => "other_interdisciplinary",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            SubjectCategory::Stem => "STEM",
            SubjectCategory::HumanitiesSocialSciences => "Humanities and Social Sciences",
            SubjectCategory::AppliedDisciplines => "Applied Disciplines",
            SubjectCategory::OtherInterdisciplinary => "Other/Interdisciplinary",
        }
    }
}

impl fmt::Display for SubjectCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One course's text of a given document type, with course metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumDocument {
    pub course_id: String,
    pub title: String,
    pub department: String,
    pub subject: SubjectCategory,
    pub doc_type: DocumentType,
    pub text: String,
    #[serde(default)]
    pub word_count: usize,
}

#[derive(Debug, Deserialize)]
struct RawDocument {
    course_id: String,
    title: String,
    department: String,
    subject: SubjectCategory,
    doc_type: DocumentType,
    text: String,
}

impl CurriculumDocument {
    pub fn new(
        course_id: impl Into<String>,
        title: impl Into<String>,
        department: impl Into<String>,
        subject: SubjectCategory,
        doc_type: DocumentType,
        text: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let course_id = course_id.into();
        let text = text.into();
        if text.trim().is_empty() {
            return Err(CorpusError::EmptyText(course_id));
        }
        let word_count = word_count(&text);
        Ok(CurriculumDocument {
            course_id,
            title: title.into(),
            department: department.into(),
            subject,
            doc_type,
            text,
            word_count,
        })
    }
}

/// Number of maximal non-whitespace runs in `text`.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Load and validate a corpus file (CSV, or `.jsonl`/`.ndjson` JSON lines).
pub fn load_corpus(path: &Path) -> Result<Vec<CurriculumDocument>, CorpusError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let raws: Vec<RawDocument> = if ext == "jsonl" || ext == "ndjson" {
        let text = fs::read_to_string(path)?;
        let mut raws = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            raws.push(
                serde_json::from_str(line)
                    .map_err(|source| CorpusError::JsonLine { line: i + 1, source })?,
            );
        }
        raws
    } else {
        let mut reader = csv::Reader::from_path(path)?;
        reader.deserialize().collect::<Result<_, _>>()?
    };

    let mut seen = HashSet::new();
    let mut docs = Vec::with_capacity(raws.len());
    for raw in raws {
        if !seen.insert((raw.course_id.clone(), raw.doc_type)) {
            return Err(CorpusError::DuplicateKey(raw.course_id, raw.doc_type));
        }
        docs.push(CurriculumDocument::new(
            raw.course_id,
            raw.title,
            raw.department,
            raw.subject,
            raw.doc_type,
            raw.text,
        )?);
    }
    Ok(docs)
}

/// Write documents as a corpus CSV.
pub fn write_corpus(path: &Path, docs: &[CurriculumDocument]) -> Result<(), CorpusError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["course_id", "title", "department", "subject", "doc_type", "text"])?;
    for d in docs {
        writer.write_record([
            d.course_id.as_str(),
            d.title.as_str(),
            d.department.as_str(),
            d.subject.as_str(),
            d.doc_type.as_str(),
            d.text.as_str(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Stratum identifier: subject category crossed with a word-count tercile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Stratum {
    pub subject: SubjectCategory,
    pub tercile: u8,
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/tercile-{}", self.subject, self.tercile)
    }
}

/// A shortfall in one stratum filled from another.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleWarning {
    pub from: Stratum,
    pub to: Stratum,
    pub moved: usize,
}

impl fmt::Display for SampleWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "stratum {} short by {}; drew from {} instead",
            self.from, self.moved, self.to
        )
    }
}

/// Result of a stratified sample: the documents plus any fallback warnings.
#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub docs: Vec<CurriculumDocument>,
    pub warnings: Vec<SampleWarning>,
}

/// Draw a deterministic stratified sample of `n` documents.
///
/// Strata are subject category x word-count tercile, with terciles computed
/// within `docs`. Allocation is proportional (largest-remainder), so each
/// stratum receives within one document of its exact quota whenever its pool
/// allows. A starved stratum falls back to the nearest stratum with spare
/// capacity and records a warning; the shortfall is never absorbed silently.
pub fn stratified_sample(
    docs: &[CurriculumDocument],
    n: usize,
    seed: u64,
) -> Result<SampleOutcome, CorpusError> {
    if docs.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    if n > docs.len() {
        return Err(CorpusError::InsufficientDocuments {
            requested: n,
            available: docs.len(),
        });
    }
    let first_type = docs[0].doc_type;
    if let Some(other) = docs.iter().find(|d| d.doc_type != first_type) {
        return Err(CorpusError::MixedDocTypes(first_type, other.doc_type));
    }
    if n == docs.len() {
        return Ok(SampleOutcome {
            docs: docs.to_vec(),
            warnings: Vec::new(),
        });
    }

    let terciles = assign_terciles(docs);
    let mut strata: BTreeMap<Stratum, Vec<usize>> = BTreeMap::new();
    for (i, doc) in docs.iter().enumerate() {
        let key = Stratum {
            subject: doc.subject,
            tercile: terciles[i],
        };
        strata.entry(key).or_default().push(i);
    }

    let keys: Vec<Stratum> = strata.keys().copied().collect();
    let sizes: Vec<usize> = keys.iter().map(|k| strata[k].len()).collect();
    let mut take = proportional_allocation(&keys, &sizes, n, docs.len());
    let warnings = redistribute_overflow(&keys, &sizes, &mut take);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = Vec::with_capacity(n);
    for (i, key) in keys.iter().enumerate() {
        let pool = &strata[key];
        let picked = rand::seq::index::sample(&mut rng, pool.len(), take[i]);
        selected.extend(picked.iter().map(|j| pool[j]));
    }
    selected.sort_unstable();
    Ok(SampleOutcome {
        docs: selected.iter().map(|&i| docs[i].clone()).collect(),
        warnings,
    })
}

/// Rank-based terciles over word counts; ties broken by course id for
/// determinism.
fn assign_terciles(docs: &[CurriculumDocument]) -> Vec<u8> {
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.sort_by(|&a, &b| {
        docs[a]
            .word_count
            .cmp(&docs[b].word_count)
            .then_with(|| docs[a].course_id.cmp(&docs[b].course_id))
    });
    let mut terciles = vec![0u8; docs.len()];
    for (rank, &idx) in order.iter().enumerate() {
        terciles[idx] = ((rank * 3) / docs.len().max(1)).min(2) as u8;
    }
    terciles
}

/// Proportional integer allocation via largest remainder.
///
/// Every stratum receives floor(quota) or floor(quota)+1 of its exact quota
/// n*size/total. Remainder units break fractional-part ties toward the
/// subject currently furthest below its own quota, so the per-subject totals
/// stay within one of proportional as well.
fn proportional_allocation(
    keys: &[Stratum],
    sizes: &[usize],
    n: usize,
    total: usize,
) -> Vec<usize> {
    let mut take: Vec<usize> = Vec::with_capacity(sizes.len());
    let mut fracs: Vec<f64> = Vec::with_capacity(sizes.len());
    let mut assigned = 0usize;
    let mut subject_quota: BTreeMap<SubjectCategory, f64> = BTreeMap::new();
    let mut subject_taken: BTreeMap<SubjectCategory, usize> = BTreeMap::new();
    for (i, &size) in sizes.iter().enumerate() {
        let quota = n as f64 * size as f64 / total as f64;
        let floor = quota.floor() as usize;
        take.push(floor);
        assigned += floor;
        fracs.push(quota - floor as f64);
        *subject_quota.entry(keys[i].subject).or_insert(0.0) += quota;
        *subject_taken.entry(keys[i].subject).or_insert(0) += floor;
    }

    let mut bumped = vec![false; sizes.len()];
    for _ in 0..n.saturating_sub(assigned) {
        let mut best: Option<usize> = None;
        for i in 0..sizes.len() {
            if bumped[i] || fracs[i] <= 0.0 {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => {
                    let df = fracs[i] - fracs[b];
                    if df.abs() > 1e-9 {
                        df > 0.0
                    } else {
                        let deficit = |j: usize| {
                            subject_quota[&keys[j].subject]
                                - subject_taken[&keys[j].subject] as f64
                        };
                        let dd = deficit(i) - deficit(b);
                        if dd.abs() > 1e-9 {
                            dd > 0.0
                        } else {
                            false
                        }
                    }
                }
            };
            if better {
                best = Some(i);
            }
        }
        let Some(i) = best else { break };
        take[i] += 1;
        bumped[i] = true;
        *subject_taken.get_mut(&keys[i].subject).unwrap() += 1;
    }
    take
}

/// Move allocation a stratum cannot supply to the nearest strata with spare
/// capacity, recording every move. Exact proportional quotas never overflow
/// a stratum, so this only fires for hand-adjusted allocations; it exists so
/// a shortfall can never be absorbed silently.
fn redistribute_overflow(
    keys: &[Stratum],
    sizes: &[usize],
    take: &mut [usize],
) -> Vec<SampleWarning> {
    let mut warnings = Vec::new();
    while let Some(over) = (0..keys.len()).find(|&i| take[i] > sizes[i]) {
        let excess = take[over] - sizes[over];
        take[over] = sizes[over];
        let mut remaining = excess;
        for cand in nearest_strata(keys, over) {
            if remaining == 0 {
                break;
            }
            let room = sizes[cand] - take[cand];
            if room == 0 {
                continue;
            }
            let moved = room.min(remaining);
            take[cand] += moved;
            remaining -= moved;
            warnings.push(SampleWarning {
                from: keys[over],
                to: keys[cand],
                moved,
            });
        }
        assert_eq!(remaining, 0, "caller guarantees global capacity");
    }
    warnings
}

/// Candidate strata ordered by closeness to `from`: same subject with the
/// closest tercile first, then other subjects in enum order distance.
fn nearest_strata(keys: &[Stratum], from: usize) -> Vec<usize> {
    let origin = keys[from];
    let subject_pos = |s: SubjectCategory| {
        SubjectCategory::ALL.iter().position(|&x| x == s).unwrap() as i32
    };
    let mut candidates: Vec<usize> = (0..keys.len()).filter(|&i| i != from).collect();
    candidates.sort_by_key(|&i| {
        let k = keys[i];
        let subject_dist = (subject_pos(k.subject) - subject_pos(origin.subject)).abs();
        let tercile_dist = (k.tercile as i32 - origin.tercile as i32).abs();
        (subject_dist, tercile_dist, i)
    });
    candidates
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn doc(course: &str, subject: SubjectCategory, words: usize) -> CurriculumDocument {
        let text = vec!["word"; words].join(" ");
        CurriculumDocument::new(
            course,
            format!("Course {course}"),
            "DEPT",
            subject,
            DocumentType::LearningObjective,
            text,
        )
        .unwrap()
    }

    #[test]
    fn word_count_basics() {
        assert_eq!(word_count(""), 0);
        assert_eq!(word_count("critical  thinking"), 2);
        assert_eq!(word_count("  one two three  "), 3);
    }

    #[test]
    fn load_corpus_counts_rows() {
        let mut tmp = tempfile::NamedTempFile::with_suffix(".csv").unwrap();
        writeln!(tmp, "course_id,title,department,subject,doc_type,text").unwrap();
        for i in 0..40 {
            writeln!(
                tmp,
                "C{i},Course {i},DEPT,stem,learning_objective,Students analyze data sets"
            )
            .unwrap();
        }
        let docs = load_corpus(tmp.path()).unwrap();
        assert_eq!(docs.len(), 40);
        assert!(docs.iter().all(|d| d.word_count == 4));
    }

    #[test]
    fn load_corpus_rejects_empty_text() {
        let mut tmp = tempfile::NamedTempFile::with_suffix(".csv").unwrap();
        writeln!(tmp, "course_id,title,department,subject,doc_type,text").unwrap();
        writeln!(tmp, "C1,Course,DEPT,stem,learning_objective,  ").unwrap();
        let err = load_corpus(tmp.path()).unwrap_err();
        assert!(matches!(err, CorpusError::EmptyText(id) if id == "C1"));
    }

    #[test]
    fn load_corpus_rejects_duplicate_key() {
        let mut tmp = tempfile::NamedTempFile::with_suffix(".csv").unwrap();
        writeln!(tmp, "course_id,title,department,subject,doc_type,text").unwrap();
        writeln!(tmp, "C1,Course,DEPT,stem,learning_objective,alpha beta").unwrap();
        writeln!(tmp, "C1,Course,DEPT,stem,learning_objective,gamma delta").unwrap();
        let err = load_corpus(tmp.path()).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateKey(id, _) if id == "C1"));
    }

    #[test]
    fn load_corpus_accepts_json_lines() {
        let mut tmp = tempfile::NamedTempFile::with_suffix(".jsonl").unwrap();
        writeln!(
            tmp,
            r#"{{"course_id":"C1","title":"T","department":"D","subject":"stem","doc_type":"learning_objective","text":"alpha beta gamma"}}"#
        )
        .unwrap();
        let docs = load_corpus(tmp.path()).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].word_count, 3);
    }

    #[test]
    fn sample_is_proportional_across_subjects() {
        // 120 docs spread evenly over the four subjects with word counts that
        // fill all three terciles per subject.
        let mut docs = Vec::new();
        for (si, subject) in SubjectCategory::ALL.into_iter().enumerate() {
            for i in 0..30 {
                docs.push(doc(&format!("C{si}-{i:02}"), subject, 10 + i));
            }
        }
        let out = stratified_sample(&docs, 40, 7).unwrap();
        assert_eq!(out.docs.len(), 40);
        assert!(out.warnings.is_empty());
        for subject in SubjectCategory::ALL {
            let got = out.docs.iter().filter(|d| d.subject == subject).count();
            assert!(
                (9..=11).contains(&got),
                "{subject} got {got}, expected 10 +/- 1"
            );
        }
    }

    #[test]
    fn sample_of_full_corpus_returns_everything() {
        let docs: Vec<_> = (0..12)
            .map(|i| doc(&format!("C{i:02}"), SubjectCategory::Stem, 5 + i))
            .collect();
        let out = stratified_sample(&docs, 12, 999).unwrap();
        assert_eq!(out.docs, docs);
    }

    #[test]
    fn sample_is_deterministic_per_seed() {
        let docs: Vec<_> = (0..60)
            .map(|i| {
                doc(
                    &format!("C{i:02}"),
                    SubjectCategory::ALL[i % 4],
                    5 + (i * 7) % 40,
                )
            })
            .collect();
        let a = stratified_sample(&docs, 20, 42).unwrap();
        let b = stratified_sample(&docs, 20, 42).unwrap();
        assert_eq!(a.docs, b.docs);
        let c = stratified_sample(&docs, 20, 43).unwrap();
        assert_ne!(a.docs, c.docs);
    }

    #[test]
    fn oversized_sample_is_rejected() {
        let docs = vec![doc("C1", SubjectCategory::Stem, 5)];
        let err = stratified_sample(&docs, 2, 1).unwrap_err();
        assert!(matches!(err, CorpusError::InsufficientDocuments { .. }));
    }

    #[test]
    fn overflowing_allocation_falls_back_with_warnings() {
        // Proportional quotas never overflow a stratum, so drive the
        // redistribution directly with a hand-adjusted allocation.
        let keys = [
            Stratum { subject: SubjectCategory::Stem, tercile: 0 },
            Stratum { subject: SubjectCategory::Stem, tercile: 1 },
            Stratum { subject: SubjectCategory::AppliedDisciplines, tercile: 0 },
        ];
        let sizes = [2usize, 5, 5];
        let mut take = [4usize, 1, 1];
        let warnings = redistribute_overflow(&keys, &sizes, &mut take);
        assert_eq!(take, [2, 3, 1], "overflow moves to the same-subject stratum");
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].moved, 2);
        assert_eq!(warnings[0].from, keys[0]);
        assert_eq!(warnings[0].to, keys[1]);
    }

    proptest! {
        #[test]
        fn word_count_monotone_under_word_append(a in ".{0,80}", w in "[a-z]{1,10}") {
            let joined = format!("{a} {w}");
            prop_assert_eq!(word_count(&joined), word_count(&a) + 1);
        }

        #[test]
        fn sample_allocation_stays_within_one_of_quota(
            sizes in proptest::collection::vec(1usize..20, 2..8),
            frac in 0.1f64..0.9,
        ) {
            let keys: Vec<Stratum> = (0..sizes.len())
                .map(|i| Stratum {
                    subject: SubjectCategory::ALL[i % 4],
                    tercile: (i / 4) as u8,
                })
                .collect();
            let total: usize = sizes.iter().sum();
            let n = ((total as f64 * frac) as usize).max(1).min(total);
            let take = proportional_allocation(&keys, &sizes, n, total);
            prop_assert_eq!(take.iter().sum::<usize>(), n);
            for (i, &size) in sizes.iter().enumerate() {
                let quota = n as f64 * size as f64 / total as f64;
                prop_assert!((take[i] as f64 - quota).abs() <= 1.0 + 1e-9);
                prop_assert!(take[i] <= size);
            }
        }
    }
}
