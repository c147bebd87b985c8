//! Batch masking annotation producing classifier training data.

use adaptrag_core::{annotate_record, AnnotationConfig, AnnotationOutcome, AnnotationReport, KnowledgeIndex, LanguageModel, PromptTemplate, TrainingExample};
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::batch::par_map;
use crate::error::{Error, Result};
use crate::formats::EmrRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFailure {
    pub record_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct AnnotationRun {
    pub reports: Vec<AnnotationReport>,
    pub failures: Vec<RecordFailure>,
}

impl AnnotationRun {
    pub fn outcomes(&self) -> impl Iterator<Item = &AnnotationOutcome> {
        self.reports.iter().flat_map(|r| r.outcomes.iter())
    }

    /// One training example per annotated unit, in record then unit order.
    pub fn training_examples(&self) -> Vec<TrainingExample> {
        self.outcomes().map(|o| TrainingExample { text: o.unit_text.clone(), label: o.label }).collect()
    }

    pub fn llm_calls(&self) -> usize {
        self.reports.iter().map(|r| r.llm_calls).sum()
    }
}

/// Annotates every record; records missing a reference are rejected up front,
/// other per-record failures are collected.
pub fn annotate_batch(
    records: &[EmrRecord],
    gateway: &dyn LanguageModel,
    kb: &KnowledgeIndex,
    diag: &PromptTemplate,
    config: &AnnotationConfig,
    workers: usize,
) -> Result<AnnotationRun> {
    let inputs = records
        .iter()
        .map(|r| r.to_annotation().ok_or_else(|| Error::Invalid(format!("record {:?} has no reference_diagnosis", r.id))))
        .collect::<Result<Vec<_>>>()?;
    let results = par_map(&inputs, workers, |r| annotate_record(r, gateway, kb, diag, config).map_err(|e| (r.record_id.clone(), e)));
    let mut run = AnnotationRun::default();
    for result in results {
        match result {
            Ok(report) => {
                for s in &report.skipped {
                    warn!(record = %report.record_id, unit = s.unit_index, error = %s.error, "unit skipped");
                }
                run.reports.push(report);
            }
            Err((record_id, e)) => {
                warn!(record = %record_id, error = %e, "annotation failed");
                run.failures.push(RecordFailure { record_id, error: e.to_string() });
            }
        }
    }
    Ok(run)
}
