//! Prediction records: the run's canonical per-pair output.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotation::AlignmentLabel;
use crate::corpus::DocumentType;
use crate::framework::FrameworkKey;
use crate::gateway::FailureKind;
use crate::pipeline::PipelineError;
use crate::prompt::Strategy;

/// One model prediction for one (document, competency, strategy, model)
/// cell.
///
/// Every cell of a run yields exactly one record. Failed cells still carry a
/// label — NA, the declared stand-in for "no usable score" — with the
/// failure kind recorded alongside, so evaluation never has silent gaps and
/// reports can flag how many substituted labels they contain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub course_id: String,
    pub doc_type: DocumentType,
    pub framework: FrameworkKey,
    pub competency_id: String,
    pub strategy: Strategy,
    pub model_name: String,
    pub label: AlignmentLabel,
    pub failure: Option<FailureKind>,
    pub prompt_hash: String,
    pub summary_hash: Option<String>,
}

impl PredictionRecord {
    /// Fixed total order for deterministic output files.
    pub fn sort_key(&self) -> (String, String, String, String, String, String) {
        (
            self.strategy.as_str().to_string(),
            self.model_name.clone(),
            self.framework.to_string(),
            self.doc_type.to_string(),
            self.course_id.clone(),
            self.competency_id.clone(),
        )
    }
}

pub fn write_predictions(
    path: &Path,
    records: &[PredictionRecord],
) -> Result<(), PipelineError> {
    let mut writer = csv::Writer::from_path(path).map_err(std::io::Error::from)?;
    for r in records {
        writer.serialize(r).map_err(std::io::Error::from)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>, PipelineError> {
    let mut reader = csv::Reader::from_path(path).map_err(std::io::Error::from)?;
    let mut records = Vec::new();
    for row in reader.deserialize::<PredictionRecord>() {
        records.push(row.map_err(std::io::Error::from)?);
    }
    Ok(records)
}
