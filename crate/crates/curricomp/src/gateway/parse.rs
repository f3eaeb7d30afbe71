//! Parsing rubric scores and extraction answers out of raw model text.
//!
//! The parser is total: it never throws, survives arbitrary bytes, and
//! accounts for every competency of the framework exactly once, either with
//! a label or with a failure kind. Matching is exact after normalization
//! (case-fold, strip punctuation, collapse whitespace) — no edit-distance
//! matching, because silently mis-attributing scores corrupts evaluation.
//! Near-misses surface as `MissingCompetency` for human review.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotation::AlignmentLabel;
use crate::framework::CompetencyFramework;
use crate::prompt::{QuestionSet, INSUFFICIENT_INFORMATION};

/// Why a competency (or a whole response) produced no usable score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The model produced no response at all; applies to every competency of
    /// the affected call.
    NoResponse,
    /// The competency line carried a token that is not a rubric label.
    UnparseableScore,
    /// No line matched the competency name.
    MissingCompetency,
    /// The competency line carried a number outside the rubric scale.
    OutOfRangeScore,
}

impl FailureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureKind::NoResponse => "no_response",
            FailureKind::UnparseableScore => "unparseable_score",
            FailureKind::MissingCompetency => "missing_competency",
            FailureKind::OutOfRangeScore => "out_of_range_score",
        }
    }
}

impl std::fmt::Display for FailureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scores extracted from one response: a label or a failure per competency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedScores {
    pub labels: BTreeMap<String, AlignmentLabel>,
    pub failures: Vec<(String, FailureKind)>,
}

impl ParsedScores {
    /// Every competency marked with the same failure kind.
    pub fn all_failed(fw: &CompetencyFramework, kind: FailureKind) -> ParsedScores {
        ParsedScores {
            labels: BTreeMap::new(),
            failures: fw
                .competencies
                .iter()
                .map(|c| (c.id.clone(), kind))
                .collect(),
        }
    }

    /// Merge chunked parses; competency sets must be disjoint.
    pub fn merge(&mut self, other: ParsedScores) {
        self.labels.extend(other.labels);
        self.failures.extend(other.failures);
    }
}

/// Case-fold, replace punctuation with spaces, and collapse whitespace.
pub fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut last_space = true;
    for ch in s.chars() {
        if ch.is_alphanumeric() {
            for lower in ch.to_lowercase() {
                out.push(lower);
            }
            last_space = false;
        } else if !last_space {
            out.push(' ');
            last_space = true;
        }
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

fn token_to_label(token: &str) -> Result<AlignmentLabel, FailureKind> {
    match token {
        "0" => Ok(AlignmentLabel::S0),
        "1" => Ok(AlignmentLabel::S1),
        "2" => Ok(AlignmentLabel::S2),
        "3" => Ok(AlignmentLabel::S3),
        "na" => Ok(AlignmentLabel::Na),
        t if !t.is_empty() && t.chars().all(|c| c.is_ascii_digit()) => {
            Err(FailureKind::OutOfRangeScore)
        }
        _ => Err(FailureKind::UnparseableScore),
    }
}

/// Extract one rubric label per framework competency from raw model text.
///
/// A competency matches a line when the normalized line starts with the
/// normalized competency name followed by at least one more token; the first
/// following token must be a rubric label. A single leading integer token
/// (list numbering) is ignored when no name matches directly. The first
/// matching line wins per competency. Empty text marks every competency
/// `NoResponse`.
pub fn parse_scores(raw_text: &str, fw: &CompetencyFramework) -> ParsedScores {
    if raw_text.trim().is_empty() {
        return ParsedScores::all_failed(fw, FailureKind::NoResponse);
    }

    // Longest normalized name first so a name that extends another cannot be
    // shadowed by its prefix.
    let mut competencies: Vec<(usize, String)> = fw
        .competencies
        .iter()
        .enumerate()
        .map(|(i, c)| (i, normalize(&c.name)))
        .collect();
    competencies.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));

    let mut outcomes: Vec<Option<Result<AlignmentLabel, FailureKind>>> =
        vec![None; fw.competencies.len()];

    for line in raw_text.lines() {
        let norm = normalize(line);
        if norm.is_empty() {
            continue;
        }
        let candidates = [norm.as_str(), strip_leading_integer(&norm)];
        'line: for (attempt, cand) in candidates.iter().enumerate() {
            if attempt == 1 && candidates[0] == candidates[1] {
                break;
            }
            for (idx, name) in &competencies {
                let rest = match cand.strip_prefix(name.as_str()) {
                    Some(rest) => rest,
                    None => continue,
                };
                if !rest.is_empty() && !rest.starts_with(' ') {
                    continue;
                }
                if outcomes[*idx].is_some() {
                    break 'line;
                }
                let outcome = match rest.split_whitespace().next() {
                    Some(token) => token_to_label(token),
                    None => Err(FailureKind::UnparseableScore),
                };
                outcomes[*idx] = Some(outcome);
                break 'line;
            }
        }
    }

    let mut parsed = ParsedScores {
        labels: BTreeMap::new(),
        failures: Vec::new(),
    };
    for (i, c) in fw.competencies.iter().enumerate() {
        match outcomes[i].take() {
            Some(Ok(label)) => {
                parsed.labels.insert(c.id.clone(), label);
            }
            Some(Err(kind)) => parsed.failures.push((c.id.clone(), kind)),
            None => parsed
                .failures
                .push((c.id.clone(), FailureKind::MissingCompetency)),
        }
    }
    parsed
}

fn strip_leading_integer(norm: &str) -> &str {
    let mut parts = norm.splitn(2, ' ');
    let first = parts.next().unwrap_or("");
    if !first.is_empty() && first.chars().all(|c| c.is_ascii_digit()) {
        parts.next().unwrap_or("")
    } else {
        norm
    }
}

/// Parse extraction answers, one per question label.
///
/// Returns `None` for an empty response (a whole-call no-response). Lines
/// split at the first colon; the left side matches a question label after
/// normalization, the right side is the raw answer. Questions with no
/// matching line or an empty answer fall back to the
/// insufficient-information sentinel, so the summary stage never invents
/// content for them.
pub fn parse_extraction_answers(
    raw_text: &str,
    qs: &QuestionSet,
) -> Option<Vec<(String, String)>> {
    if raw_text.trim().is_empty() {
        return None;
    }
    let mut found: BTreeMap<usize, String> = BTreeMap::new();
    for line in raw_text.lines() {
        let Some((left, right)) = line.split_once(':') else {
            continue;
        };
        let norm_left = normalize(left);
        let keys = [norm_left.as_str(), strip_leading_integer(&norm_left)];
        for (qi, q) in qs.questions.iter().enumerate() {
            if found.contains_key(&qi) {
                continue;
            }
            let norm_label = normalize(&q.label);
            if keys.contains(&norm_label.as_str()) {
                found.insert(qi, right.trim().to_string());
                break;
            }
        }
    }
    Some(
        qs.questions
            .iter()
            .enumerate()
            .map(|(qi, q)| {
                let answer = match found.get(&qi) {
                    Some(a) if !a.is_empty() => a.clone(),
                    _ => INSUFFICIENT_INFORMATION.to_string(),
                };
                (q.label.clone(), answer)
            })
            .collect(),
    )
}
