//! JSONL readers and writers for every line-oriented artifact.
//!
//! Blank lines are skipped; any other line must parse as one object of the
//! expected shape or the whole file is rejected with its line number.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use adaptrag_core::eval::validate_terminology;
use adaptrag_core::{AnnotationRecord, KnowledgeDoc, MockRule, TerminologyEntry, TrainingExample};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A patient record. The reference diagnosis is needed for annotation and
/// evaluation but not for diagnosis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmrRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_diagnosis: Option<String>,
}

impl EmrRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self { id: id.into(), text: text.into(), reference_diagnosis: None }
    }

    pub fn with_reference(mut self, reference: impl Into<String>) -> Self {
        self.reference_diagnosis = Some(reference.into());
        self
    }

    /// The record as annotation input; `None` without a reference.
    pub fn to_annotation(&self) -> Option<AnnotationRecord> {
        Some(AnnotationRecord {
            record_id: self.id.clone(),
            text: self.text.clone(),
            reference_diagnosis: self.reference_diagnosis.clone()?,
        })
    }
}

/// A predicted diagnosis. Diagnosis traces can be read directly as
/// predictions thanks to the field aliases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    #[serde(alias = "record_id")]
    pub id: String,
    #[serde(alias = "final_diagnosis")]
    pub diagnosis: String,
}

pub fn parse_jsonl<T: DeserializeOwned>(reader: impl BufRead, path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::Data { path: path.into(), line: i + 1, message: e.to_string() })?;
        out.push(item);
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(BufReader::new(file), path)
}

pub fn write_jsonl_to<T: Serialize>(mut writer: impl Write, items: impl IntoIterator<Item = T>) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, &item)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl_to(BufWriter::new(file), items).map_err(|e| Error::io(path, e))
}

fn data_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Data { path: path.into(), line, message: message.into() }
}

fn check_unique<'a>(path: &Path, ids: impl Iterator<Item = &'a str>, what: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for (i, id) in ids.enumerate() {
        if !seen.insert(id) {
            return Err(data_error(path, i + 1, format!("duplicate {what} {id:?}")));
        }
    }
    Ok(())
}

pub fn load_kb(path: &Path) -> Result<Vec<KnowledgeDoc>> {
    let docs: Vec<KnowledgeDoc> = read_jsonl(path)?;
    for (i, doc) in docs.iter().enumerate() {
        doc.validate().map_err(|e| data_error(path, i + 1, e.to_string()))?;
    }
    check_unique(path, docs.iter().map(|d| d.doc_id.as_str()), "doc_id")?;
    Ok(docs)
}

pub fn load_emr(path: &Path) -> Result<Vec<EmrRecord>> {
    let records: Vec<EmrRecord> = read_jsonl(path)?;
    for (i, r) in records.iter().enumerate() {
        if r.id.trim().is_empty() || r.text.trim().is_empty() {
            return Err(data_error(path, i + 1, "record id and text must be non-empty"));
        }
    }
    check_unique(path, records.iter().map(|r| r.id.as_str()), "record id")?;
    Ok(records)
}

/// EMR records that must all carry a non-empty reference diagnosis.
pub fn load_reference_emr(path: &Path) -> Result<Vec<EmrRecord>> {
    let records = load_emr(path)?;
    if let Some(i) = records.iter().position(|r| r.reference_diagnosis.as_deref().is_none_or(|d| d.trim().is_empty())) {
        return Err(data_error(path, i + 1, format!("record {:?} has no reference_diagnosis", records[i].id)));
    }
    Ok(records)
}

pub fn load_training(path: &Path) -> Result<Vec<TrainingExample>> {
    read_jsonl(path)
}

pub fn load_mock_rules(path: &Path) -> Result<Vec<MockRule>> {
    let rules: Vec<MockRule> = read_jsonl(path)?;
    if let Some(i) = rules.iter().position(|r| r.pattern.is_empty()) {
        return Err(data_error(path, i + 1, "mock rule pattern must be non-empty"));
    }
    Ok(rules)
}

pub fn load_terminology(path: &Path) -> Result<Vec<TerminologyEntry>> {
    let entries: Vec<TerminologyEntry> = read_jsonl(path)?;
    validate_terminology(&entries).map_err(|e| data_error(path, 0, e.to_string()))?;
    Ok(entries)
}

pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let preds: Vec<Prediction> = read_jsonl(path)?;
    check_unique(path, preds.iter().map(|p| p.id.as_str()), "prediction id")?;
    Ok(preds)
}
