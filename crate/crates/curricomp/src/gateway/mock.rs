//! Deterministic mock backend for reproducible pipeline runs and tests.

use sha2::{Digest, Sha256};

use crate::annotation::AlignmentLabel;
use crate::prompt::{BundleMeta, PromptBundle, INSUFFICIENT_INFORMATION};

use super::{Backend, BackendReply, GatewayError, ModelConfig};

/// Pseudo-model that derives every output from (content hash, seed).
///
/// Scoring prompts get one syntactically valid "Name: LABEL" line per
/// competency; extraction prompts get one answer line per question. Same
/// bundle and seed, same bytes, always.
#[derive(Debug, Clone)]
pub struct MockBackend {
    seed: u64,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        MockBackend { seed }
    }
}

impl Backend for MockBackend {
    fn send(
        &self,
        bundle: &PromptBundle,
        _cfg: &ModelConfig,
    ) -> Result<BackendReply, GatewayError> {
        Ok(BackendReply::text_only(mock_complete(bundle, self.seed)))
    }

    fn name(&self) -> &'static str {
        "deterministic_mock"
    }
}

fn keyed_hash(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Render the deterministic response text for a bundle.
pub fn mock_complete(bundle: &PromptBundle, seed: u64) -> String {
    let seed_bytes = seed.to_le_bytes();
    let hash_bytes = bundle.content_hash.as_bytes();
    match &bundle.meta {
        BundleMeta::Scoring { competencies, .. } => competencies
            .iter()
            .map(|(id, name)| {
                let h = keyed_hash(&[id.as_bytes(), hash_bytes, &seed_bytes]);
                let label = AlignmentLabel::ALL[(h % 5) as usize];
                format!("{name}: {label}")
            })
            .collect::<Vec<_>>()
            .join("\n"),
        BundleMeta::Extraction { question_labels } => question_labels
            .iter()
            .map(|label| {
                let h = keyed_hash(&[label.as_bytes(), hash_bytes, &seed_bytes]);
                if h.is_multiple_of(7) {
                    format!("{label}: {INSUFFICIENT_INFORMATION}")
                } else {
                    format!(
                        "{label}: synthesized estimate {:08x} drawn from the document",
                        h as u32
                    )
                }
            })
            .collect::<Vec<_>>()
            .join("\n"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CurriculumDocument, DocumentType, SubjectCategory};
    use crate::framework::{CompetencyFramework, FrameworkKey};
    use crate::prompt::{select_question_set, PromptFactory, Strategy};

    fn scoring_bundle() -> PromptBundle {
        let factory = PromptFactory::default();
        let doc = CurriculumDocument::new(
            "C1",
            "T",
            "D",
            SubjectCategory::Stem,
            DocumentType::LearningObjective,
            "Students design and defend arguments.",
        )
        .unwrap();
        let fw = CompetencyFramework::bundled(FrameworkKey::Eu).unwrap();
        factory
            .render_scoring_prompt(Strategy::Zero, Some(&doc), &fw, None, None)
            .unwrap()
    }

    #[test]
    fn same_bundle_and_seed_give_identical_output() {
        let bundle = scoring_bundle();
        assert_eq!(mock_complete(&bundle, 7), mock_complete(&bundle, 7));
    }

    #[test]
    fn different_seeds_give_different_output() {
        let bundle = scoring_bundle();
        let outputs: Vec<String> = (0..100).map(|s| mock_complete(&bundle, s)).collect();
        let mut unique = outputs.clone();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), outputs.len());
    }

    #[test]
    fn extraction_bundle_gets_one_answer_per_question() {
        let factory = PromptFactory::default();
        let doc = CurriculumDocument::new(
            "C1",
            "T",
            "D",
            SubjectCategory::Stem,
            DocumentType::InstructionalSchedule,
            "Week one covers sampling.",
        )
        .unwrap();
        let qs = select_question_set(doc.doc_type);
        let bundle = factory.render_extraction_prompt(&doc, qs).unwrap();
        let text = mock_complete(&bundle, 3);
        assert_eq!(text.lines().count(), 5);
        for q in &qs.questions {
            assert!(text.contains(&format!("{}:", q.label)));
        }
    }
}
