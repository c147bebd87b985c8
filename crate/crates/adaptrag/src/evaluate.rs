//! Joins predictions with reference records and scores them.

use std::collections::BTreeMap;
use std::io::Write;

use adaptrag_core::{extract_mentions, link, DiagnosisSet, EvalMetrics, MetricsAccumulator, TerminologyEntry};
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{Error, Result};
use crate::formats::{EmrRecord, Prediction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEval {
    pub id: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `;`-joined code lists, for flat CSV output.
    pub predicted_codes: String,
    pub reference_codes: String,
    pub unlinked_predicted: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub averaging: String,
    pub threshold: f64,
    pub metrics: EvalMetrics,
    /// Reference records with no prediction; scored as empty predictions.
    pub missing_predictions: usize,
    /// Predictions whose id matches no reference record; ignored.
    pub unknown_predictions: usize,
    /// References that linked to no terminology code; excluded from scoring.
    pub unlinked_references: usize,
}

fn codes(set: &DiagnosisSet) -> String {
    set.codes.iter().map(String::as_str).collect::<Vec<_>>().join(";")
}

fn link_text(text: &str, terminology: &[TerminologyEntry], threshold: f64) -> Result<DiagnosisSet> {
    link(&extract_mentions(text), terminology, threshold).map_err(|e| Error::Invalid(e.to_string()))
}

pub fn evaluate(
    predictions: &[Prediction],
    references: &[EmrRecord],
    terminology: &[TerminologyEntry],
    threshold: f64,
) -> Result<(EvalReport, Vec<RecordEval>)> {
    let by_id: BTreeMap<&str, &str> = predictions.iter().map(|p| (p.id.as_str(), p.diagnosis.as_str())).collect();
    let mut acc = MetricsAccumulator::default();
    let mut rows = Vec::with_capacity(references.len());
    let (mut missing, mut unlinked_refs) = (0, 0);
    for record in references {
        let reference_text = record
            .reference_diagnosis
            .as_deref()
            .ok_or_else(|| Error::Invalid(format!("record {:?} has no reference_diagnosis", record.id)))?;
        let reference = link_text(reference_text, terminology, threshold)?;
        if reference.codes.is_empty() {
            warn!(record = %record.id, reference = reference_text, "reference links to no terminology code; skipped");
            unlinked_refs += 1;
            continue;
        }
        let predicted_text = by_id.get(record.id.as_str()).copied().unwrap_or_else(|| {
            missing += 1;
            ""
        });
        let pred = link_text(predicted_text, terminology, threshold)?;
        let m = acc.add(&pred, &reference);
        rows.push(RecordEval {
            id: record.id.clone(),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            predicted_codes: codes(&pred),
            reference_codes: codes(&reference),
            unlinked_predicted: pred.unlinked.join(";"),
        });
    }
    let known: std::collections::BTreeSet<&str> = references.iter().map(|r| r.id.as_str()).collect();
    let report = EvalReport {
        averaging: "micro".into(),
        threshold,
        metrics: acc.finish(),
        missing_predictions: missing,
        unknown_predictions: predictions.iter().filter(|p| !known.contains(p.id.as_str())).count(),
        unlinked_references: unlinked_refs,
    };
    Ok((report, rows))
}

pub fn write_record_csv(writer: impl Write, rows: &[RecordEval]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
