//! The two-stage reasoning pipeline and single-cell scoring.
//!
//! Stage one renders the guided-question extraction prompt for a document,
//! calls the model once for all questions, and parses the answers into a
//! structured summary. Stage two renders the strategy's scoring prompt and
//! parses per-competency labels. The extraction call is shared across the
//! summary-consuming strategies through the response cache: one extraction
//! per (model, document), no matter how many variants run.

use std::collections::BTreeMap;

use crate::corpus::CurriculumDocument;
use crate::framework::CompetencyFramework;
use crate::gateway::{
    parse_extraction_answers, parse_scores, FailureKind, Gateway, ParsedScores,
};
use crate::pipeline::PipelineError;
use crate::prompt::{
    select_question_set, PromptBundle, PromptError, PromptFactory, Strategy, StructuredSummary,
};

/// Result of scoring one (document, framework, strategy, model) cell.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    /// The extraction summary, when the strategy used one.
    pub summary: Option<StructuredSummary>,
    /// Hash of the extraction prompt the summary came from.
    pub summary_hash: Option<String>,
    pub scores: ParsedScores,
    /// Scoring prompt hash per competency id (chunked prompts differ).
    pub prompt_hash_by_id: BTreeMap<String, String>,
    /// Scoring prompts that were rendered, for introspection and tests.
    pub scoring_prompts: Vec<PromptBundle>,
}

/// Run one of the two-stage reasoning variants for a document.
///
/// For the summary-consuming variants, stage one runs first; a stage-one
/// no-response aborts the variant for this document with every competency
/// recorded as failed. The questions-only variant skips stage one entirely
/// (one model call). Stage-two failures flow through the parsed scores.
pub fn run_curricular_cot(
    doc: &CurriculumDocument,
    fw: &CompetencyFramework,
    strategy: Strategy,
    factory: &PromptFactory,
    gateway: &Gateway,
    chunk_size: Option<usize>,
) -> Result<CellOutcome, PipelineError> {
    assert!(
        strategy.is_reasoning_variant(),
        "run_curricular_cot takes the reasoning variants only"
    );
    score_cell(doc, fw, strategy, factory, gateway, chunk_size)
}

/// Score one cell under any of the six strategies.
pub fn score_cell(
    doc: &CurriculumDocument,
    fw: &CompetencyFramework,
    strategy: Strategy,
    factory: &PromptFactory,
    gateway: &Gateway,
    chunk_size: Option<usize>,
) -> Result<CellOutcome, PipelineError> {
    let qs = select_question_set(doc.doc_type);

    // Stage one, when the strategy consumes a summary.
    let mut summary = None;
    let mut summary_hash = None;
    if strategy.needs_summary() {
        let extraction = factory.render_extraction_prompt(doc, qs)?;
        summary_hash = Some(extraction.content_hash.clone());
        let answers = match gateway.complete(&extraction) {
            Ok(response) => parse_extraction_answers(&response.raw_text, qs),
            Err(err) => {
                log::warn!(
                    "extraction failed for {} ({}): {err}",
                    doc.course_id,
                    gateway.model_name()
                );
                None
            }
        };
        match answers {
            Some(answers) => {
                summary = Some(StructuredSummary {
                    course_id: doc.course_id.clone(),
                    doc_type: doc.doc_type,
                    answers,
                    raw_model_text: String::new(),
                });
            }
            None => {
                // Stage-one no-response aborts the variant for this document.
                let hash = summary_hash.clone().unwrap_or_default();
                return Ok(CellOutcome {
                    summary: None,
                    summary_hash,
                    scores: ParsedScores::all_failed(fw, FailureKind::NoResponse),
                    prompt_hash_by_id: fw
                        .competencies
                        .iter()
                        .map(|c| (c.id.clone(), hash.clone()))
                        .collect(),
                    scoring_prompts: Vec::new(),
                });
            }
        }
    }

    // Stage two: one scoring prompt per chunk (the whole framework when
    // chunking is off).
    let chunk = chunk_size.unwrap_or(fw.competencies.len().max(1));
    let mut scores = ParsedScores {
        labels: BTreeMap::new(),
        failures: Vec::new(),
    };
    let mut prompt_hash_by_id = BTreeMap::new();
    let mut scoring_prompts = Vec::new();

    let mut start = 0usize;
    while start < fw.competencies.len() {
        let end = (start + chunk).min(fw.competencies.len());
        let view = if chunk >= fw.competencies.len() {
            fw.clone()
        } else {
            fw.chunk(start..end)
        };
        let (want_doc, want_qs, want_summary) = strategy.scoring_inputs();
        let bundle = match factory.render_scoring_prompt(
            strategy,
            want_doc.then_some(doc),
            &view,
            want_qs.then_some(qs),
            if want_summary { summary.as_ref() } else { None },
        ) {
            Ok(bundle) => bundle,
            Err(PromptError::PromptTooLong { len, max }) => {
                // Surfaced before dispatch; the affected competencies count
                // as unanswered.
                log::warn!(
                    "scoring prompt for {} exceeds budget ({len} > {max}); recording no-response",
                    doc.course_id
                );
                for c in &view.competencies {
                    scores.failures.push((c.id.clone(), FailureKind::NoResponse));
                    prompt_hash_by_id.insert(c.id.clone(), String::new());
                }
                start = end;
                continue;
            }
            Err(other) => return Err(other.into()),
        };
        let chunk_scores = match gateway.complete(&bundle) {
            Ok(response) => parse_scores(&response.raw_text, &view),
            Err(err) => {
                log::warn!(
                    "scoring failed for {} ({}): {err}",
                    doc.course_id,
                    gateway.model_name()
                );
                ParsedScores::all_failed(&view, FailureKind::NoResponse)
            }
        };
        for c in &view.competencies {
            prompt_hash_by_id.insert(c.id.clone(), bundle.content_hash.clone());
        }
        scoring_prompts.push(bundle);
        scores.merge(chunk_scores);
        start = end;
    }

    Ok(CellOutcome {
        summary,
        summary_hash: if strategy.needs_summary() {
            summary_hash
        } else {
            None
        },
        scores,
        prompt_hash_by_id,
        scoring_prompts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DocumentType, SubjectCategory};
    use crate::framework::FrameworkKey;
    use crate::gateway::{Backend, BackendReply, GatewayError, ModelConfig};
    use std::sync::Arc;

    fn doc() -> CurriculumDocument {
        CurriculumDocument::new(
            "C1",
            "Research Methods",
            "SOC",
            SubjectCategory::HumanitiesSocialSciences,
            DocumentType::LearningObjective,
            "Students design studies, analyze evidence, and present findings in writing.",
        )
        .unwrap()
    }

    fn mock_gateway(dir: &std::path::Path) -> Gateway {
        Gateway::from_config(ModelConfig::mock("mock-a"), dir, 11, 2).unwrap()
    }

    #[test]
    fn answers_only_strategy_scores_without_document_text() {
        let tmp = tempfile::tempdir().unwrap();
        let gw = mock_gateway(tmp.path());
        let factory = PromptFactory::default();
        let fw = CompetencyFramework::bundled(FrameworkKey::Esdc).unwrap();
        let outcome =
            run_curricular_cot(&doc(), &fw, Strategy::A, &factory, &gw, None).unwrap();
        let summary = outcome.summary.as_ref().unwrap();
        assert_eq!(summary.answers.len(), 3);
        let prompt = &outcome.scoring_prompts[0];
        for (label, answer) in &summary.answers {
            assert!(prompt.user_text.contains(&format!("{label}: {answer}")));
        }
        assert!(!prompt.user_text.contains(&doc().text));
        assert_eq!(outcome.scores.labels.len() + outcome.scores.failures.len(), 9);
    }

    #[test]
    fn questions_only_strategy_makes_exactly_one_call() {
        let tmp = tempfile::tempdir().unwrap();
        let gw = mock_gateway(tmp.path());
        let factory = PromptFactory::default();
        let fw = CompetencyFramework::bundled(FrameworkKey::Eu).unwrap();
        let outcome =
            run_curricular_cot(&doc(), &fw, Strategy::Cq, &factory, &gw, None).unwrap();
        assert!(outcome.summary.is_none());
        assert!(outcome.summary_hash.is_none());
        assert_eq!(gw.dispatched_calls(), 1);
    }

    #[test]
    fn summary_consuming_variants_share_the_extraction_call() {
        let tmp = tempfile::tempdir().unwrap();
        let gw = mock_gateway(tmp.path());
        let factory = PromptFactory::default();
        let fw = CompetencyFramework::bundled(FrameworkKey::Eu).unwrap();
        let d = doc();
        let cqa = score_cell(&d, &fw, Strategy::Cqa, &factory, &gw, None).unwrap();
        let qa = score_cell(&d, &fw, Strategy::Qa, &factory, &gw, None).unwrap();
        assert_eq!(cqa.summary_hash, qa.summary_hash);
        // One extraction + two scoring calls; the second extraction resolves
        // from cache.
        assert_eq!(gw.dispatched_calls(), 3);
    }

    struct DeadBackend;

    impl Backend for DeadBackend {
        fn send(
            &self,
            _bundle: &crate::prompt::PromptBundle,
            _cfg: &ModelConfig,
        ) -> Result<BackendReply, GatewayError> {
            Err(GatewayError::BackendUnavailable("down".into()))
        }

        fn name(&self) -> &'static str {
            "dead"
        }
    }

    #[test]
    fn stage_one_failure_aborts_the_variant_with_failures_recorded() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = ModelConfig::mock("dead");
        cfg.max_retries = 0;
        let gw = Gateway::with_backend(cfg, tmp.path(), Arc::new(DeadBackend), 1).unwrap();
        let factory = PromptFactory::default();
        let fw = CompetencyFramework::bundled(FrameworkKey::Esdc).unwrap();
        let outcome =
            run_curricular_cot(&doc(), &fw, Strategy::Cqa, &factory, &gw, None).unwrap();
        assert!(outcome.summary.is_none());
        assert_eq!(outcome.scores.failures.len(), 9);
        assert!(outcome
            .scores
            .failures
            .iter()
            .all(|(_, k)| *k == FailureKind::NoResponse));
        assert!(outcome.scoring_prompts.is_empty());
    }

    #[test]
    fn chunked_scoring_accounts_for_every_competency() {
        let tmp = tempfile::tempdir().unwrap();
        let gw = mock_gateway(tmp.path());
        let factory = PromptFactory::default();
        let fw = CompetencyFramework::bundled(FrameworkKey::Onet).unwrap();
        let outcome =
            score_cell(&doc(), &fw, Strategy::Zero, &factory, &gw, Some(8)).unwrap();
        assert_eq!(outcome.scoring_prompts.len(), 3);
        assert_eq!(
            outcome.scores.labels.len() + outcome.scores.failures.len(),
            21
        );
        assert_eq!(outcome.prompt_hash_by_id.len(), 21);
        // Competencies in different chunks carry different prompt hashes.
        let h_first = &outcome.prompt_hash_by_id["complex-problem-solving"];
        let h_last = &outcome.prompt_hash_by_id["written-comprehension"];
        assert_ne!(h_first, h_last);
    }
}
