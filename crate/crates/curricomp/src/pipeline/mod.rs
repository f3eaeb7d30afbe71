//! Run orchestration: configuration, cell scoring, and output assembly.

mod analysis;
mod config;
mod cot;
mod execute;
mod records;

pub use analysis::{
    build_eval_reports, build_pair_observations, document_metadata, gold_labels,
    join_predictions, JoinedPair, PairKey,
};
pub use config::RunConfig;
pub use cot::{run_curricular_cot, score_cell, CellOutcome};
pub use execute::{execute, RunSummary};
pub use records::{load_predictions, write_predictions, PredictionRecord};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Framework(#[from] crate::framework::FrameworkError),
    #[error(transparent)]
    Annotation(#[from] crate::annotation::AnnotationError),
    #[error(transparent)]
    Prompt(#[from] crate::prompt::PromptError),
    #[error(transparent)]
    Template(#[from] crate::prompt::TemplateError),
    #[error(transparent)]
    Gateway(#[from] crate::gateway::GatewayError),
    #[error(transparent)]
    Regression(#[from] crate::regression::RegressionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
