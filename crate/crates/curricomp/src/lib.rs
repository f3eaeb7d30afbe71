//! Batch analytics for mapping postsecondary curriculum documents to
//! 21st-century competency frameworks.
//!
//! The crate covers the full loop: ingesting curriculum corpora, rendering
//! rubric-scored prompts under six strategies (including a two-stage
//! guided-question reasoning pipeline), dispatching them to cached
//! chat-completion backends, and evaluating predictions against human
//! annotations with ordinal agreement statistics, majority-class baselines,
//! and heterogeneity regressions.
//!
//! Everything an evaluation run produces is a deterministic function of the
//! corpus, the configuration, and one seed. See the `guide` module (built
//! from the mdbook sources in `book/`) for a narrative walkthrough.

pub mod annotation;
pub mod corpus;
pub mod eval;
pub mod framework;
pub mod gateway;
pub mod pipeline;
pub mod prompt;
pub mod regression;

pub mod guide;

pub use annotation::{AlignmentLabel, AnnotationRecord, Round};
pub use corpus::{CurriculumDocument, DocumentType, SubjectCategory};
pub use eval::GranularityLevel;
pub use framework::{Competency, CompetencyFramework, FrameworkKey};
pub use gateway::{FailureKind, ModelConfig, ParsedScores};
pub use pipeline::{PredictionRecord, RunConfig};
pub use prompt::{PromptBundle, PromptFactory, Strategy, StructuredSummary};
