//! Deterministic prompt rendering for the six scoring strategies and the
//! guided-question extraction stage.
//!
//! Rendering is a pure function of its inputs: the same document, framework,
//! and summary always produce byte-identical prompt text and therefore the
//! same content hash, which is what the response cache keys on.

mod questions;
mod templates;

pub use questions::{select_question_set, GuidedQuestion, QuestionSet, QuestionSetKey};
pub use templates::{render, TemplateError, TemplateRole, TemplateSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{CurriculumDocument, DocumentType};
use crate::framework::CompetencyFramework;

/// Sentinel an extraction answer uses when the document gives no basis for a
/// question; it keeps the summary stage from papering over missing evidence.
pub const INSUFFICIENT_INFORMATION: &str = "INSUFFICIENT INFORMATION";

/// Rubric scale block embedded in every scoring prompt.
pub const RUBRIC_TEXT: &str = "\
3: The competency is explicitly and clearly stated as a course objective.
2: The competency can be reasonably inferred from the course document.
1: The competency is vaguely implied but not clearly emphasized.
0: The competency is clearly unrelated to the course.
NA: The competency may be relevant, but there is insufficient information to determine its presence.";

/// The six prompting strategies.
///
/// `Zero` and `Def` score directly from the document (`Def` adds competency
/// definitions). The four reasoning variants combine the original document
/// (C), the guided questions (Q), and the extracted answers (A): `Cqa`,
/// `Cq`, `Qa`, and `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "ZERO")]
    Zero,
    #[serde(rename = "DEF")]
    Def,
    #[serde(rename = "CQA")]
    Cqa,
    #[serde(rename = "CQ")]
    Cq,
    #[serde(rename = "QA")]
    Qa,
    #[serde(rename = "A")]
    A,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Zero,
        Strategy::Def,
        Strategy::Cqa,
        Strategy::Cq,
        Strategy::Qa,
        Strategy::A,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Zero => "ZERO",
            Strategy::Def => "DEF",
            Strategy::Cqa => "CQA",
            Strategy::Cq => "CQ",
            Strategy::Qa => "QA",
            Strategy::A => "A",
        }
    }

    pub fn parse(s: &str) -> Option<Strategy> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.as_str().eq_ignore_ascii_case(s.trim()))
    }

    /// Whether the strategy's scoring prompt needs an extraction-stage
    /// summary.
    pub fn needs_summary(self) -> bool {
        matches!(self, Strategy::Cqa | Strategy::Qa | Strategy::A)
    }

    /// Whether this is one of the two-stage reasoning variants.
    pub fn is_reasoning_variant(self) -> bool {
        matches!(self, Strategy::Cqa | Strategy::Cq | Strategy::Qa | Strategy::A)
    }

    /// Which optional inputs the scoring renderer accepts for this strategy:
    /// (document, question set, summary).
    pub fn scoring_inputs(self) -> (bool, bool, bool) {
        match self {
            Strategy::Zero | Strategy::Def => (true, false, false),
            Strategy::Cqa => (true, true, true),
            Strategy::Cq => (true, true, false),
            Strategy::Qa => (false, true, true),
            Strategy::A => (false, false, true),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Extraction-stage answers for one document, in question order.
///
/// An answer may be the literal [`INSUFFICIENT_INFORMATION`] sentinel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredSummary {
    pub course_id: String,
    pub doc_type: DocumentType,
    pub answers: Vec<(String, String)>,
    pub raw_model_text: String,
}

impl StructuredSummary {
    /// Render the "Label: answer" block embedded in scoring prompts.
    pub fn as_block(&self) -> String {
        self.answers
            .iter()
            .map(|(label, answer)| format!("{label}: {answer}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// What a prompt asks the model to produce, with the metadata the mock
/// backend and parsers key on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BundleMeta {
    /// Extraction prompt answering the given question labels.
    Extraction { question_labels: Vec<String> },
    /// Scoring prompt over competencies (id, display name) of a framework.
    Scoring {
        strategy: Strategy,
        competencies: Vec<(String, String)>,
    },
}

/// A rendered prompt: system and user text plus a content digest.
///
/// The digest covers the prompt kind and the model-visible text only, so two
/// strategies that happen to render identical extraction prompts share a
/// cache entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub content_hash: String,
    pub meta: BundleMeta,
}

impl PromptBundle {
    fn new(kind_tag: &str, system_text: String, user_text: String, meta: BundleMeta) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(kind_tag.as_bytes());
        hasher.update([0u8]);
        hasher.update(system_text.as_bytes());
        hasher.update([0u8]);
        hasher.update(user_text.as_bytes());
        let content_hash = hex::encode(hasher.finalize());
        PromptBundle {
            system_text,
            user_text,
            content_hash,
            meta,
        }
    }

    /// The strategy for scoring bundles; extraction bundles have none.
    pub fn strategy(&self) -> Option<Strategy> {
        match &self.meta {
            BundleMeta::Scoring { strategy, .. } => Some(*strategy),
            BundleMeta::Extraction { .. } => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("strategy {strategy} {problem}")]
    StrategyInputMismatch {
        strategy: Strategy,
        problem: String,
    },
    #[error("competency {0:?} has no definition; definition-grounded prompts need one")]
    MissingDefinition(String),
    #[error("rendered prompt is {len} characters, budget is {max}")]
    PromptTooLong { len: usize, max: usize },
}

/// Renders prompts from a template set under a character budget.
///
/// The budget surfaces over-long inputs before dispatch instead of letting a
/// backend truncate or refuse them.
#[derive(Debug, Clone)]
pub struct PromptFactory {
    templates: TemplateSet,
    max_chars: usize,
}

pub const DEFAULT_MAX_PROMPT_CHARS: usize = 200_000;

impl Default for PromptFactory {
    fn default() -> Self {
        PromptFactory::new(TemplateSet::bundled(), DEFAULT_MAX_PROMPT_CHARS)
    }
}

impl PromptFactory {
    pub fn new(templates: TemplateSet, max_chars: usize) -> Self {
        PromptFactory {
            templates,
            max_chars,
        }
    }

    /// Render the extraction prompt for a document and its question set.
    ///
    /// The prompt embeds the full document text as a delimited block, every
    /// question in order, and the instruction to answer each question or
    /// emit the insufficient-information sentinel.
    pub fn render_extraction_prompt(
        &self,
        doc: &CurriculumDocument,
        qs: &QuestionSet,
    ) -> Result<PromptBundle, PromptError> {
        debug_assert_eq!(qs.set_key, select_question_set(doc.doc_type).set_key);
        let user_text = render(
            self.templates.text(TemplateRole::Extraction),
            &[
                ("document_text", doc.text.as_str()),
                ("questions", &questions_block(qs)),
            ],
        );
        let system_text = self
            .templates
            .text(TemplateRole::SystemExtraction)
            .trim_end()
            .to_string();
        self.check_budget(&system_text, &user_text)?;
        Ok(PromptBundle::new(
            "extraction",
            system_text,
            user_text,
            BundleMeta::Extraction {
                question_labels: qs.labels().iter().map(|s| s.to_string()).collect(),
            },
        ))
    }

    /// Render the scoring prompt for a strategy.
    ///
    /// Each strategy accepts exactly one combination of the optional inputs;
    /// anything else is a [`PromptError::StrategyInputMismatch`]. Every
    /// scoring prompt embeds the rubric scale and the per-line output
    /// contract; the definition-grounded strategy additionally lists
    /// competency definitions.
    pub fn render_scoring_prompt(
        &self,
        strategy: Strategy,
        doc: Option<&CurriculumDocument>,
        fw: &CompetencyFramework,
        qs: Option<&QuestionSet>,
        summary: Option<&StructuredSummary>,
    ) -> Result<PromptBundle, PromptError> {
        let (want_doc, want_qs, want_summary) = strategy.scoring_inputs();
        check_input(strategy, "document", want_doc, doc.is_some())?;
        check_input(strategy, "question set", want_qs, qs.is_some())?;
        check_input(strategy, "summary", want_summary, summary.is_some())?;
        if let (Some(doc), Some(qs)) = (doc, qs) {
            if qs.set_key != select_question_set(doc.doc_type).set_key {
                return Err(PromptError::StrategyInputMismatch {
                    strategy,
                    problem: format!(
                        "question set {:?} does not match document type {}",
                        qs.set_key, doc.doc_type
                    ),
                });
            }
        }
        if let (Some(qs), Some(summary)) = (qs, summary) {
            if summary.answers.len() != qs.questions.len() {
                return Err(PromptError::StrategyInputMismatch {
                    strategy,
                    problem: format!(
                        "summary has {} answers for {} questions",
                        summary.answers.len(),
                        qs.questions.len()
                    ),
                });
            }
        }

        let with_definitions = strategy == Strategy::Def;
        if with_definitions {
            for c in &fw.competencies {
                if !c.has_definition() {
                    return Err(PromptError::MissingDefinition(c.id.clone()));
                }
            }
        }

        let competency_list = competency_block(fw, with_definitions);
        let mut substitutions: Vec<(&str, String)> = vec![
            ("rubric", RUBRIC_TEXT.to_string()),
            ("competency_list", competency_list),
        ];
        if let Some(doc) = doc {
            substitutions.push(("document_text", doc.text.clone()));
        }
        if let Some(qs) = qs {
            substitutions.push(("questions", questions_block(qs)));
        }
        if let Some(summary) = summary {
            substitutions.push(("summary", summary.as_block()));
        }
        let pairs: Vec<(&str, &str)> = substitutions
            .iter()
            .map(|(k, v)| (*k, v.as_str()))
            .collect();
        let user_text = render(self.templates.text(TemplateRole::Scoring(strategy)), &pairs);
        let system_text = self
            .templates
            .text(TemplateRole::SystemScoring)
            .trim_end()
            .to_string();
        self.check_budget(&system_text, &user_text)?;
        Ok(PromptBundle::new(
            &format!("scoring:{strategy}"),
            system_text,
            user_text,
            BundleMeta::Scoring {
                strategy,
                competencies: fw
                    .competencies
                    .iter()
                    .map(|c| (c.id.clone(), c.name.clone()))
                    .collect(),
            },
        ))
    }

    fn check_budget(&self, system: &str, user: &str) -> Result<(), PromptError> {
        let len = system.chars().count() + user.chars().count();
        if len > self.max_chars {
            return Err(PromptError::PromptTooLong {
                len,
                max: self.max_chars,
            });
        }
        Ok(())
    }
}

fn check_input(
    strategy: Strategy,
    name: &str,
    wanted: bool,
    provided: bool,
) -> Result<(), PromptError> {
    match (wanted, provided) {
        (true, false) => Err(PromptError::StrategyInputMismatch {
            strategy,
            problem: format!("requires a {name}"),
        }),
        (false, true) => Err(PromptError::StrategyInputMismatch {
            strategy,
            problem: format!("does not take a {name}"),
        }),
        _ => Ok(()),
    }
}

fn questions_block(qs: &QuestionSet) -> String {
    qs.questions
        .iter()
        .enumerate()
        .map(|(i, q)| format!("{}. {}: {}", i + 1, q.label, q.text))
        .collect::<Vec<_>>()
        .join("\n")
}

fn competency_block(fw: &CompetencyFramework, with_definitions: bool) -> String {
    fw.competencies
        .iter()
        .map(|c| {
            if with_definitions {
                format!("- {}: {}", c.name, c.definition.as_deref().unwrap_or(""))
            } else {
                format!("- {}", c.name)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SubjectCategory;
    use crate::framework::FrameworkKey;

    fn doc(doc_type: DocumentType) -> CurriculumDocument {
        CurriculumDocument::new(
            "C1",
            "Intro to Data",
            "DATA",
            SubjectCategory::Stem,
            doc_type,
            "Students collect, clean, and present data in weekly labs.",
        )
        .unwrap()
    }

    fn summary_for(doc_type: DocumentType) -> StructuredSummary {
        let qs = select_question_set(doc_type);
        StructuredSummary {
            course_id: "C1".into(),
            doc_type,
            answers: qs
                .labels()
                .iter()
                .map(|l| (l.to_string(), format!("answer about {l}")))
                .collect(),
            raw_model_text: String::new(),
        }
    }

    #[test]
    fn extraction_prompt_is_deterministic_and_contains_document() {
        let factory = PromptFactory::default();
        let d = doc(DocumentType::LearningObjective);
        let qs = select_question_set(d.doc_type);
        let a = factory.render_extraction_prompt(&d, qs).unwrap();
        let b = factory.render_extraction_prompt(&d, qs).unwrap();
        assert_eq!(a.content_hash, b.content_hash);
        assert!(a.user_text.contains(&d.text));
        assert!(a.user_text.contains("--- BEGIN COURSE DOCUMENT ---"));
        // Exactly the three learning-objective questions.
        assert_eq!(a.user_text.matches("1. ").count(), 1);
        assert!(a.user_text.contains("3. Expected performance:"));
        assert!(!a.user_text.contains("4. "));
    }

    #[test]
    fn zero_prompt_lists_names_without_definitions() {
        let factory = PromptFactory::default();
        let d = doc(DocumentType::ConciseCourseDescription);
        let fw = CompetencyFramework::bundled(FrameworkKey::Eu).unwrap();
        let bundle = factory
            .render_scoring_prompt(Strategy::Zero, Some(&d), &fw, None, None)
            .unwrap();
        assert!(bundle.user_text.contains(&d.text));
        for name in fw.competency_names() {
            assert!(bundle.user_text.contains(name));
        }
        assert!(!bundle.user_text.contains("The confident, critical"));
        assert!(bundle.user_text.contains(RUBRIC_TEXT));
    }

    #[test]
    fn def_prompt_appends_definitions() {
        let factory = PromptFactory::default();
        let d = doc(DocumentType::ConciseCourseDescription);
        let fw = CompetencyFramework::bundled(FrameworkKey::Eu).unwrap();
        let bundle = factory
            .render_scoring_prompt(Strategy::Def, Some(&d), &fw, None, None)
            .unwrap();
        assert!(bundle.user_text.contains("The confident, critical"));
    }

    #[test]
    fn def_requires_definitions() {
        let factory = PromptFactory::default();
        let d = doc(DocumentType::ConciseCourseDescription);
        let mut fw = CompetencyFramework::bundled(FrameworkKey::Eu).unwrap();
        fw.competencies[2].definition = None;
        let err = factory
            .render_scoring_prompt(Strategy::Def, Some(&d), &fw, None, None)
            .unwrap_err();
        assert!(matches!(err, PromptError::MissingDefinition(_)));
    }

    #[test]
    fn answers_only_prompt_has_summary_but_no_document() {
        let factory = PromptFactory::default();
        let fw = CompetencyFramework::bundled(FrameworkKey::Esdc).unwrap();
        let summary = summary_for(DocumentType::LearningObjective);
        let bundle = factory
            .render_scoring_prompt(Strategy::A, None, &fw, None, Some(&summary))
            .unwrap();
        assert!(bundle.user_text.contains("answer about Target skills"));
        assert!(!bundle.user_text.contains("BEGIN COURSE DOCUMENT"));
    }

    #[test]
    fn cq_rejects_a_summary() {
        let factory = PromptFactory::default();
        let d = doc(DocumentType::LearningObjective);
        let fw = CompetencyFramework::bundled(FrameworkKey::Onet).unwrap();
        let qs = select_question_set(d.doc_type);
        let summary = summary_for(d.doc_type);
        let err = factory
            .render_scoring_prompt(Strategy::Cq, Some(&d), &fw, Some(qs), Some(&summary))
            .unwrap_err();
        assert!(matches!(err, PromptError::StrategyInputMismatch { .. }));
    }

    #[test]
    fn exhaustive_input_grid_accepts_exactly_one_combination_per_strategy() {
        let factory = PromptFactory::default();
        let d = doc(DocumentType::LearningObjective);
        let fw = CompetencyFramework::bundled(FrameworkKey::Eu).unwrap();
        let qs = select_question_set(d.doc_type);
        let summary = summary_for(d.doc_type);
        for strategy in Strategy::ALL {
            let mut accepted = Vec::new();
            for mask in 0..8u8 {
                let with_doc = mask & 1 != 0;
                let with_qs = mask & 2 != 0;
                let with_summary = mask & 4 != 0;
                let result = factory.render_scoring_prompt(
                    strategy,
                    with_doc.then_some(&d),
                    &fw,
                    with_qs.then_some(qs),
                    with_summary.then_some(&summary),
                );
                match result {
                    Ok(_) => accepted.push((with_doc, with_qs, with_summary)),
                    Err(PromptError::StrategyInputMismatch { .. }) => {}
                    Err(other) => panic!("unexpected error: {other}"),
                }
            }
            assert_eq!(accepted, vec![strategy.scoring_inputs()], "{strategy}");
        }
    }

    #[test]
    fn competency_names_appear_in_registry_order() {
        let factory = PromptFactory::default();
        let d = doc(DocumentType::DetailedCourseDescription);
        let fw = CompetencyFramework::bundled(FrameworkKey::Onet).unwrap();
        let bundle = factory
            .render_scoring_prompt(Strategy::Zero, Some(&d), &fw, None, None)
            .unwrap();
        let mut last = 0usize;
        for name in fw.competency_names() {
            let pos = bundle.user_text.find(&format!("- {name}")).unwrap();
            assert!(pos > last, "{name} out of order");
            last = pos;
        }
    }

    #[test]
    fn over_budget_prompt_is_rejected_before_dispatch() {
        let factory = PromptFactory::new(TemplateSet::bundled(), 500);
        let d = doc(DocumentType::LearningObjective);
        let fw = CompetencyFramework::bundled(FrameworkKey::Onet).unwrap();
        let err = factory
            .render_scoring_prompt(Strategy::Zero, Some(&d), &fw, None, None)
            .unwrap_err();
        assert!(matches!(err, PromptError::PromptTooLong { .. }));
    }

    #[test]
    fn mismatched_question_set_is_rejected() {
        let factory = PromptFactory::default();
        let d = doc(DocumentType::LearningObjective);
        let fw = CompetencyFramework::bundled(FrameworkKey::Eu).unwrap();
        let wrong = select_question_set(DocumentType::InstructionalSchedule);
        let err = factory
            .render_scoring_prompt(Strategy::Cq, Some(&d), &fw, Some(wrong), None)
            .unwrap_err();
        assert!(matches!(err, PromptError::StrategyInputMismatch { .. }));
    }
}
