//! Run configuration: one TOML file drives an entire run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{DocumentType, SubjectCategory};
use crate::eval::{GranularityLevel, WeightScheme};
use crate::framework::FrameworkKey;
use crate::gateway::ModelConfig;
use crate::pipeline::PipelineError;
use crate::prompt::{Strategy, DEFAULT_MAX_PROMPT_CHARS};

/// Everything a run needs. The file is copied verbatim into the run's output
/// directory, so every output tree is self-describing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Single seed feeding all randomness: sampling and the mock backend.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub cache_dir: PathBuf,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Optional directory of template overrides.
    #[serde(default)]
    pub template_dir: Option<PathBuf>,
    /// Frameworks to score against. Loaded from `framework_dir/<key>.json`
    /// when set, otherwise from the bundled fixtures.
    pub frameworks: Vec<FrameworkKey>,
    #[serde(default)]
    pub framework_dir: Option<PathBuf>,
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_granularity")]
    pub granularity: Vec<GranularityLevel>,
    /// Human annotations; evaluation, regression, and the NA audit run only
    /// when present.
    #[serde(default)]
    pub annotations: Option<PathBuf>,
    /// Strategy whose predictions feed the heterogeneity regressions.
    #[serde(default = "default_regression_strategy")]
    pub regression_strategy: Strategy,
    /// Document types filtered out of evaluation and regression reports.
    /// A report-time filter only; ingestion and prediction always cover
    /// every configured type.
    #[serde(default)]
    pub exclude_doc_types: Vec<DocumentType>,
    /// Score competencies in chunks of this size instead of one prompt per
    /// framework. Unset means all at once.
    #[serde(default)]
    pub competency_chunk_size: Option<usize>,
    #[serde(default = "default_max_prompt_chars")]
    pub max_prompt_chars: usize,
    #[serde(default)]
    pub kappa_weights: WeightScheme,
    #[serde(default)]
    pub reference_model: Option<String>,
    #[serde(default)]
    pub reference_subject: Option<SubjectCategory>,
    #[serde(default = "default_true")]
    pub standardize_word_count: bool,
    /// Corpus file per document type.
    pub corpus: BTreeMap<DocumentType, PathBuf>,
    pub models: Vec<ModelConfig>,
}

fn default_parallelism() -> usize {
    4
}

fn default_granularity() -> Vec<GranularityLevel> {
    GranularityLevel::ALL.to_vec()
}

fn default_regression_strategy() -> Strategy {
    Strategy::Zero
}

fn default_max_prompt_chars() -> usize {
    DEFAULT_MAX_PROMPT_CHARS
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    /// Parse a config file, returning the struct and the raw bytes that get
    /// copied into the output directory.
    pub fn load(path: &Path) -> Result<(RunConfig, String), PipelineError> {
        let raw = std::fs::read_to_string(path)?;
        let cfg: RunConfig = toml::from_str(&raw)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Ok((cfg, raw))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.corpus.is_empty() {
            return Err(PipelineError::Config("no corpus files configured".into()));
        }
        if self.frameworks.is_empty() {
            return Err(PipelineError::Config("no frameworks configured".into()));
        }
        if self.strategies.is_empty() {
            return Err(PipelineError::Config("no strategies configured".into()));
        }
        if self.models.is_empty() {
            return Err(PipelineError::Config("no models configured".into()));
        }
        let mut names: Vec<&str> = self.models.iter().map(|m| m.model_name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.models.len() {
            return Err(PipelineError::Config("duplicate model names".into()));
        }
        for m in &self.models {
            m.validate_for_eval()?;
        }
        if self.parallelism == 0 {
            return Err(PipelineError::Config("parallelism must be at least 1".into()));
        }
        if self.competency_chunk_size == Some(0) {
            return Err(PipelineError::Config(
                "competency_chunk_size must be at least 1 when set".into(),
            ));
        }
        if self.granularity.is_empty() {
            return Err(PipelineError::Config("no granularity levels configured".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::BackendKind;

    const MINIMAL: &str = r#"
seed = 7
out_dir = "out"
cache_dir = "cache"
frameworks = ["eu"]
strategies = ["ZERO", "CQA"]

[corpus]
learning_objective = "lo.csv"

[[models]]
backend = "deterministic_mock"
model_name = "mock-a"
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.parallelism, 4);
        assert_eq!(cfg.granularity, GranularityLevel::ALL.to_vec());
        assert_eq!(cfg.regression_strategy, Strategy::Zero);
        assert_eq!(cfg.models[0].backend, BackendKind::DeterministicMock);
        assert_eq!(cfg.models[0].temperature, 0.0);
        assert!(cfg.standardize_word_count);
    }

    #[test]
    fn nonzero_temperature_fails_validation() {
        let mut cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        cfg.models[0].temperature = 0.7;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn duplicate_model_names_fail_validation() {
        let mut cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        cfg.models.push(cfg.models[0].clone());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn empty_sections_fail_validation() {
        let mut cfg: RunConfig = toml::from_str(MINIMAL).unwrap();
        cfg.strategies.clear();
        assert!(cfg.validate().is_err());
    }
}
