//! Prompt template storage.
//!
//! Templates are plain text with named placeholders ({{document_text}},
//! {{competency_list}}, {{rubric}}, {{questions}}, {{summary}}). Defaults
//! ship with the crate; a template directory can override any subset by file
//! name, so operators can substitute exact wording without recompiling.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::Strategy;

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("failed to read template {name}: {source}")]
    Io {
        name: String,
        source: std::io::Error,
    },
    #[error("template {name} must contain placeholder {placeholder}")]
    MissingPlaceholder { name: String, placeholder: String },
    #[error("template {name} must not contain placeholder {placeholder}")]
    ForbiddenPlaceholder { name: String, placeholder: String },
}

/// Which template a renderer asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TemplateRole {
    SystemScoring,
    SystemExtraction,
    Extraction,
    Scoring(Strategy),
}

impl TemplateRole {
    /// File name the role is loaded from inside a template directory.
    pub fn file_name(self) -> &'static str {
        match self {
            TemplateRole::SystemScoring => "system_scoring.txt",
            TemplateRole::SystemExtraction => "system_extraction.txt",
            TemplateRole::Extraction => "extraction.txt",
            TemplateRole::Scoring(Strategy::Zero) => "zero.txt",
            TemplateRole::Scoring(Strategy::Def) => "def.txt",
            TemplateRole::Scoring(Strategy::Cqa) => "cqa.txt",
            TemplateRole::Scoring(Strategy::Cq) => "cq.txt",
            TemplateRole::Scoring(Strategy::Qa) => "qa.txt",
            TemplateRole::Scoring(Strategy::A) => "a.txt",
        }
    }

    fn all() -> Vec<TemplateRole> {
        let mut roles = vec![
            TemplateRole::SystemScoring,
            TemplateRole::SystemExtraction,
            TemplateRole::Extraction,
        ];
        roles.extend(Strategy::ALL.into_iter().map(TemplateRole::Scoring));
        roles
    }

    fn default_text(self) -> &'static str {
        match self {
            TemplateRole::SystemScoring => {
                include_str!("../../fixtures/templates/system_scoring.txt")
            }
            TemplateRole::SystemExtraction => {
                include_str!("../../fixtures/templates/system_extraction.txt")
            }
            TemplateRole::Extraction => include_str!("../../fixtures/templates/extraction.txt"),
            TemplateRole::Scoring(Strategy::Zero) => {
                include_str!("../../fixtures/templates/zero.txt")
            }
            TemplateRole::Scoring(Strategy::Def) => {
                include_str!("../../fixtures/templates/def.txt")
            }
            TemplateRole::Scoring(Strategy::Cqa) => {
                include_str!("../../fixtures/templates/cqa.txt")
            }
            TemplateRole::Scoring(Strategy::Cq) => include_str!("../../fixtures/templates/cq.txt"),
            TemplateRole::Scoring(Strategy::Qa) => include_str!("../../fixtures/templates/qa.txt"),
            TemplateRole::Scoring(Strategy::A) => include_str!("../../fixtures/templates/a.txt"),
        }
    }

    /// Placeholders the template must contain / must not contain.
    fn placeholder_contract(self) -> (&'static [&'static str], &'static [&'static str]) {
        match self {
            TemplateRole::SystemScoring | TemplateRole::SystemExtraction => (&[], &[
                "{{document_text}}",
                "{{competency_list}}",
                "{{rubric}}",
                "{{questions}}",
                "{{summary}}",
            ]),
            TemplateRole::Extraction => (
                &["{{document_text}}", "{{questions}}"],
                &["{{competency_list}}", "{{rubric}}", "{{summary}}"],
            ),
            TemplateRole::Scoring(strategy) => {
                let (required, forbidden): (&[&str], &[&str]) = match strategy {
                    Strategy::Zero | Strategy::Def => (
                        &["{{document_text}}", "{{competency_list}}", "{{rubric}}"],
                        &["{{questions}}", "{{summary}}"],
                    ),
                    Strategy::Cqa => (
                        &[
                            "{{document_text}}",
                            "{{competency_list}}",
                            "{{rubric}}",
                            "{{questions}}",
                            "{{summary}}",
                        ],
                        &[],
                    ),
                    Strategy::Cq => (
                        &[
                            "{{document_text}}",
                            "{{competency_list}}",
                            "{{rubric}}",
                            "{{questions}}",
                        ],
                        &["{{summary}}"],
                    ),
                    Strategy::Qa => (
                        &[
                            "{{competency_list}}",
                            "{{rubric}}",
                            "{{questions}}",
                            "{{summary}}",
                        ],
                        &["{{document_text}}"],
                    ),
                    Strategy::A => (
                        &["{{competency_list}}", "{{rubric}}", "{{summary}}"],
                        &["{{document_text}}", "{{questions}}"],
                    ),
                };
                (required, forbidden)
            }
        }
    }
}

/// The full set of templates a prompt factory renders from.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    texts: BTreeMap<&'static str, String>,
}

impl TemplateSet {
    /// The bundled default templates.
    pub fn bundled() -> TemplateSet {
        let texts = TemplateRole::all()
            .into_iter()
            .map(|r| (r.file_name(), r.default_text().to_string()))
            .collect();
        TemplateSet { texts }
    }

    /// Bundled defaults with any files present in `dir` overriding them.
    pub fn with_overrides(dir: &Path) -> Result<TemplateSet, TemplateError> {
        let mut set = TemplateSet::bundled();
        for role in TemplateRole::all() {
            let path = dir.join(role.file_name());
            if path.is_file() {
                let text = fs::read_to_string(&path).map_err(|source| TemplateError::Io {
                    name: role.file_name().to_string(),
                    source,
                })?;
                set.texts.insert(role.file_name(), text);
            }
        }
        set.validate()?;
        Ok(set)
    }

    /// Check every template against its placeholder contract.
    pub fn validate(&self) -> Result<(), TemplateError> {
        for role in TemplateRole::all() {
            let text = self.text(role);
            let (required, forbidden) = role.placeholder_contract();
            for ph in required {
                if !text.contains(ph) {
                    return Err(TemplateError::MissingPlaceholder {
                        name: role.file_name().to_string(),
                        placeholder: ph.to_string(),
                    });
                }
            }
            for ph in forbidden {
                if text.contains(ph) {
                    return Err(TemplateError::ForbiddenPlaceholder {
                        name: role.file_name().to_string(),
                        placeholder: ph.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn text(&self, role: TemplateRole) -> &str {
        &self.texts[role.file_name()]
    }
}

/// Substitute named placeholders in a template.
pub fn render(template: &str, substitutions: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in substitutions {
        out = out.replace(&format!("{{{{{name}}}}}"), value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_templates_satisfy_their_contracts() {
        TemplateSet::bundled().validate().unwrap();
    }

    #[test]
    fn render_substitutes_placeholders() {
        let out = render("a {{x}} b {{y}}", &[("x", "1"), ("y", "2")]);
        assert_eq!(out, "a 1 b 2");
    }

    #[test]
    fn override_directory_replaces_named_templates() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("zero.txt"),
            "CUSTOM {{document_text}} {{competency_list}} {{rubric}}",
        )
        .unwrap();
        let set = TemplateSet::with_overrides(dir.path()).unwrap();
        assert!(set.text(TemplateRole::Scoring(Strategy::Zero)).starts_with("CUSTOM"));
        // Untouched roles keep the bundled text.
        assert_eq!(
            set.text(TemplateRole::Extraction),
            TemplateSet::bundled().text(TemplateRole::Extraction)
        );
    }

    #[test]
    fn invalid_override_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("zero.txt"), "missing everything").unwrap();
        let err = TemplateSet::with_overrides(dir.path()).unwrap_err();
        assert!(matches!(err, TemplateError::MissingPlaceholder { .. }));
    }
}
