//! Competency frameworks and the registry that loads and validates them.
//!
//! Three frameworks ship as bundled fixtures: O*NET (21 competencies),
//! EU Key Competences (8), and ESDC Success Model (9). Loading validates the
//! competency count against the expected count for the key, so transcription
//! errors in a framework file fail loudly instead of skewing downstream
//! prompts and reports.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while loading or validating a framework file.
#[derive(Debug, Error)]
pub enum FrameworkError {
    #[error("failed to read framework file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed framework file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("framework file declares key {found} but {expected} was requested")]
    KeyMismatch {
        expected: FrameworkKey,
        found: FrameworkKey,
    },
    #[error("{key} must list {expected} competencies, found {found}")]
    CountMismatch {
        key: FrameworkKey,
        expected: usize,
        found: usize,
    },
    #[error("duplicate competency id {0:?}")]
    DuplicateId(String),
    #[error("duplicate competency name {0:?} after normalization")]
    DuplicateName(String),
    #[error("competency {0:?} has an empty name")]
    EmptyName(String),
    #[error("competency {0:?} has no definition (required for definition-grounded prompting)")]
    MissingDefinition(String),
}

/// The three competency frameworks covered by the bundled fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameworkKey {
    Onet,
    Eu,
    Esdc,
}

impl FrameworkKey {
    pub const ALL: [FrameworkKey; 3] = [FrameworkKey::Onet, FrameworkKey::Eu, FrameworkKey::Esdc];

    /// Number of competencies the framework must contain.
    pub fn expected_count(self) -> usize {
        match self {
            FrameworkKey::Onet => 21,
            FrameworkKey::Eu => 8,
            FrameworkKey::Esdc => 9,
        }
    }

    /// Stable lowercase token used in file names, CSV columns, and config files.
    pub fn as_str(self) -> &'static str {
        match self {
            FrameworkKey::Onet => "onet",
            FrameworkKey::Eu => "eu",
            FrameworkKey::Esdc => "esdc",
        }
    }

    pub fn parse(s: &str) -> Option<FrameworkKey> {
        match s.trim().to_ascii_lowercase().as_str() {
            "onet" => Some(FrameworkKey::Onet),
            "eu" => Some(FrameworkKey::Eu),
            "esdc" => Some(FrameworkKey::Esdc),
            _ => None,
        }
    }
}

impl fmt::Display for FrameworkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One competency within a framework.
///
/// `definition` carries the annotator-facing description used by the
/// definition-grounded prompting strategy; it may be absent for frameworks
/// that are only scored by name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Competency {
    pub id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<String>,
}

impl Competency {
    pub fn has_definition(&self) -> bool {
        self.definition.as_deref().is_some_and(|d| !d.trim().is_empty())
    }
}

/// A named framework with an ordered competency list.
///
/// Competency order is stable across loads; prompt rendering and CSV column
/// layouts depend on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompetencyFramework {
    pub key: FrameworkKey,
    pub title: String,
    pub competencies: Vec<Competency>,
    #[serde(default)]
    pub expected_count: usize,
}

impl CompetencyFramework {
    /// Load and validate a framework file for the given key.
    pub fn load(path: &Path, key: FrameworkKey) -> Result<Self, FrameworkError> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text, key)
    }

    /// Parse and validate framework JSON for the given key.
    pub fn from_json(text: &str, key: FrameworkKey) -> Result<Self, FrameworkError> {
        let mut fw: CompetencyFramework = serde_json::from_str(text)?;
        if fw.key != key {
            return Err(FrameworkError::KeyMismatch {
                expected: key,
                found: fw.key,
            });
        }
        fw.expected_count = key.expected_count();
        fw.validate()?;
        Ok(fw)
    }

    /// The bundled fixture for a framework key.
    pub fn bundled(key: FrameworkKey) -> Result<Self, FrameworkError> {
        let text = match key {
            FrameworkKey::Onet => include_str!("../fixtures/frameworks/onet.json"),
            FrameworkKey::Eu => include_str!("../fixtures/frameworks/eu.json"),
            FrameworkKey::Esdc => include_str!("../fixtures/frameworks/esdc.json"),
        };
        Self::from_json(text, key)
    }

    fn validate(&self) -> Result<(), FrameworkError> {
        let expected = self.key.expected_count();
        if self.competencies.len() != expected {
            return Err(FrameworkError::CountMismatch {
                key: self.key,
                expected,
                found: self.competencies.len(),
            });
        }
        let mut ids = HashSet::new();
        let mut names = HashSet::new();
        for c in &self.competencies {
            if c.name.trim().is_empty() {
                return Err(FrameworkError::EmptyName(c.id.clone()));
            }
            if c.id.trim().is_empty() || !ids.insert(c.id.clone()) {
                return Err(FrameworkError::DuplicateId(c.id.clone()));
            }
            if !names.insert(normalize_name(&c.name)) {
                return Err(FrameworkError::DuplicateName(c.name.clone()));
            }
        }
        Ok(())
    }

    /// Competency names in stored order.
    pub fn competency_names(&self) -> Vec<&str> {
        self.competencies.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn competency(&self, id: &str) -> Option<&Competency> {
        self.competencies.iter().find(|c| c.id == id)
    }

    /// Checks that every competency carries a non-empty definition.
    ///
    /// Definition-grounded prompting cannot run without them.
    pub fn require_definitions(&self) -> Result<(), FrameworkError> {
        for c in &self.competencies {
            if !c.has_definition() {
                return Err(FrameworkError::MissingDefinition(c.id.clone()));
            }
        }
        Ok(())
    }

    /// A framework view holding a subset of the competencies, used when
    /// scoring prompts are chunked. Skips count validation by construction.
    pub fn chunk(&self, range: std::ops::Range<usize>) -> CompetencyFramework {
        CompetencyFramework {
            key: self.key,
            title: self.title.clone(),
            competencies: self.competencies[range].to_vec(),
            expected_count: 0,
        }
    }
}

/// Lowercase + whitespace-collapsed form used for duplicate-name detection.
fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Stable id for a competency name: lowercase with hyphens.
pub fn slugify(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut last_dash = true;
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
            last_dash = false;
        } else if !last_dash {
            out.push('-');
            last_dash = true;
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_onet_has_21_competencies() {
        let fw = CompetencyFramework::bundled(FrameworkKey::Onet).unwrap();
        assert_eq!(fw.competencies.len(), 21);
        assert_eq!(fw.expected_count, 21);
        assert_eq!(fw.competencies[0].name, "Complex problem solving");
    }

    #[test]
    fn bundled_eu_has_8_competencies() {
        let fw = CompetencyFramework::bundled(FrameworkKey::Eu).unwrap();
        assert_eq!(fw.competencies.len(), 8);
        assert!(fw.competency_names().contains(&"Digital competence"));
    }

    #[test]
    fn bundled_esdc_has_9_names_including_adaptability() {
        let fw = CompetencyFramework::bundled(FrameworkKey::Esdc).unwrap();
        let names = fw.competency_names();
        assert_eq!(names.len(), 9);
        assert!(names.contains(&"Adaptability"));
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let mut fw = CompetencyFramework::bundled(FrameworkKey::Esdc).unwrap();
        fw.competencies.pop();
        let text = serde_json::to_string(&fw).unwrap();
        let err = CompetencyFramework::from_json(&text, FrameworkKey::Esdc).unwrap_err();
        assert!(matches!(
            err,
            FrameworkError::CountMismatch {
                expected: 9,
                found: 8,
                ..
            }
        ));
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let mut fw = CompetencyFramework::bundled(FrameworkKey::Eu).unwrap();
        fw.competencies[1].id = fw.competencies[0].id.clone();
        fw.competencies[1].name = "Something else".into();
        let text = serde_json::to_string(&fw).unwrap();
        let err = CompetencyFramework::from_json(&text, FrameworkKey::Eu).unwrap_err();
        assert!(matches!(err, FrameworkError::DuplicateId(_)));
    }

    #[test]
    fn key_mismatch_is_rejected() {
        let text = include_str!("../fixtures/frameworks/eu.json");
        let err = CompetencyFramework::from_json(text, FrameworkKey::Onet).unwrap_err();
        assert!(matches!(err, FrameworkError::KeyMismatch { .. }));
    }

    #[test]
    fn serialize_roundtrips_for_all_bundled_frameworks() {
        for key in FrameworkKey::ALL {
            let fw = CompetencyFramework::bundled(key).unwrap();
            let text = serde_json::to_string(&fw).unwrap();
            let back = CompetencyFramework::from_json(&text, key).unwrap();
            assert_eq!(fw, back);
        }
    }

    #[test]
    fn ids_and_normalized_names_are_distinct() {
        for key in FrameworkKey::ALL {
            let fw = CompetencyFramework::bundled(key).unwrap();
            let ids: HashSet<_> = fw.competencies.iter().map(|c| &c.id).collect();
            assert_eq!(ids.len(), fw.competencies.len());
            let names: HashSet<_> = fw
                .competencies
                .iter()
                .map(|c| normalize_name(&c.name))
                .collect();
            assert_eq!(names.len(), fw.competencies.len());
        }
    }

    #[test]
    fn bundled_ids_follow_slug_convention() {
        for key in FrameworkKey::ALL {
            let fw = CompetencyFramework::bundled(key).unwrap();
            for c in &fw.competencies {
                assert_eq!(c.id, slugify(&c.name), "id for {:?}", c.name);
            }
        }
    }

    #[test]
    fn require_definitions_flags_blank_definition() {
        let mut fw = CompetencyFramework::bundled(FrameworkKey::Eu).unwrap();
        assert!(fw.require_definitions().is_ok());
        fw.competencies[3].definition = Some("   ".into());
        let err = fw.require_definitions().unwrap_err();
        assert!(matches!(err, FrameworkError::MissingDefinition(id) if id == "digital-competence"));
    }

    #[test]
    fn slugify_handles_punctuation() {
        assert_eq!(slugify("Achievement/effort"), "achievement-effort");
        assert_eq!(
            slugify("Judgment and decision making"),
            "judgment-and-decision-making"
        );
        assert_eq!(slugify("  Digital  "), "digital");
    }
}
