//! Training labels for the unit classifier by masking one unit at a time.
//!
//! When the model diagnoses the full record correctly, each unit is masked
//! and labeled A if the diagnosis then goes wrong, C otherwise. When the full
//! record is already misdiagnosed, each unit is used as a BM25 probe instead
//! and labeled B if it retrieves a document about the reference disease, C
//! otherwise.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::UnitLabel;
use crate::eval::{extract_mentions, DEFAULT_LINK_THRESHOLD};
use crate::gateway::{render, LanguageModel, LlmError, LlmRequest, PromptTemplate, TemplateError};
use crate::index::{IndexError, KnowledgeIndex};
use crate::segment::{segment, SegmentError, SegmentationConfig, TextUnit};
use crate::similarity::similarity;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    #[serde(rename = "id")]
    pub record_id: String,
    pub text: String,
    pub reference_diagnosis: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedVariant {
    pub masked_index: usize,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    /// Full record diagnosed correctly; labels come from masking.
    S1,
    /// Full record misdiagnosed; labels come from knowledge-base probes.
    S2,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationOutcome {
    pub record_id: String,
    pub unit_index: usize,
    pub unit_text: String,
    pub label: UnitLabel,
    pub strategy: Strategy,
    pub full_diag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masked_diag: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_hit: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedUnit {
    pub unit_index: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationReport {
    pub record_id: String,
    pub strategy: Strategy,
    /// One outcome per annotated unit, in unit order.
    pub outcomes: Vec<AnnotationOutcome>,
    pub skipped: Vec<SkippedUnit>,
    pub llm_calls: usize,
    pub probes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnotationConfig {
    /// Chunks retrieved per probe.
    pub m: usize,
    pub match_threshold: f64,
    pub segmentation: SegmentationConfig,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        Self {
            m: 5,
            match_threshold: DEFAULT_LINK_THRESHOLD,
            segmentation: SegmentationConfig::default(),
            temperature: 0.0,
            max_tokens: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnnotationError {
    #[error("record {record_id:?}: {source}")]
    Segmentation { record_id: String, source: SegmentError },
    #[error("masking needs at least 2 units, record has {0}")]
    TooFewUnits(usize),
    #[error("unit index {index} out of range for {n} units")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("full-record diagnosis failed: {0}")]
    Gateway(#[from] LlmError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("knowledge probe failed: {0}")]
    Index(#[from] IndexError),
    #[error("record {0:?} has an empty text or reference diagnosis")]
    InvalidRecord(String),
}

/// The record with unit `i` removed. Remaining units keep their order and the
/// separator that originally followed each of them.
pub fn mask_unit(source: &str, units: &[TextUnit], i: usize) -> Result<MaskedVariant, AnnotationError> {
    let n = units.len();
    if n < 2 {
        return Err(AnnotationError::TooFewUnits(n));
    }
    if i >= n {
        return Err(AnnotationError::IndexOutOfRange { index: i, n });
    }
    let chars: Vec<char> = source.chars().collect();
    let kept: Vec<usize> = (0..n).filter(|&k| k != i).collect();
    let mut text = String::new();
    for (pos, &k) in kept.iter().enumerate() {
        text.push_str(&units[k].text);
        if pos + 1 < kept.len() {
            let gap_end = units[k + 1].span.start.min(chars.len());
            let gap_start = units[k].span.end.min(gap_end);
            text.extend(&chars[gap_start..gap_end]);
        }
    }
    Ok(MaskedVariant { masked_index: i, text })
}

/// True when some mention in `predicted` is at least `threshold` similar to
/// some mention in `reference`.
pub fn diagnosis_matches(predicted: &str, reference: &str, threshold: f64) -> bool {
    let refs = extract_mentions(reference);
    extract_mentions(predicted).iter().any(|p| refs.iter().any(|r| similarity(p, r) >= threshold))
}

fn diagnose_text<M: LanguageModel + ?Sized>(
    gateway: &M,
    template: &PromptTemplate,
    text: &str,
    tag: String,
    config: &AnnotationConfig,
) -> Result<String, AnnotationError> {
    let bindings: BTreeMap<&str, &str> = [("patient", text)].into();
    let prompt = render(template, &bindings)?;
    let request = LlmRequest::new(prompt, tag).with_generation(config.temperature, config.max_tokens);
    Ok(gateway.complete(&request)?.text)
}

/// Labels every unit of `record`. Per-unit gateway failures skip the unit; a
/// failure on the full-record call fails the record.
pub fn annotate_record<M: LanguageModel + ?Sized>(
    record: &AnnotationRecord,
    gateway: &M,
    kb: &KnowledgeIndex,
    diag_template: &PromptTemplate,
    config: &AnnotationConfig,
) -> Result<AnnotationReport, AnnotationError> {
    if record.text.trim().is_empty() || record.reference_diagnosis.trim().is_empty() {
        return Err(AnnotationError::InvalidRecord(record.record_id.clone()));
    }
    let units = segment(&record.text, &config.segmentation)
        .map_err(|source| AnnotationError::Segmentation { record_id: record.record_id.clone(), source })?;
    if units.len() < 2 {
        return Err(AnnotationError::TooFewUnits(units.len()));
    }

    let full_tag = format!("annotate:{}:full", record.record_id);
    let full_diag = diagnose_text(gateway, diag_template, &record.text, full_tag, config)?;
    let reference = &record.reference_diagnosis;
    let strategy = if diagnosis_matches(&full_diag, reference, config.match_threshold) { Strategy::S1 } else { Strategy::S2 };

    let mut report = AnnotationReport {
        record_id: record.record_id.clone(),
        strategy,
        outcomes: Vec::with_capacity(units.len()),
        skipped: Vec::new(),
        llm_calls: 1,
        probes: 0,
    };
    let outcome = |unit: &TextUnit, label, masked_diag, probe_hit| AnnotationOutcome {
        record_id: record.record_id.clone(),
        unit_index: unit.index,
        unit_text: unit.text.clone(),
        label,
        strategy,
        full_diag: full_diag.clone(),
        masked_diag,
        probe_hit,
    };

    for unit in &units {
        match strategy {
            Strategy::S1 => {
                let variant = mask_unit(&record.text, &units, unit.index)?;
                let tag = format!("annotate:{}:mask-{}", record.record_id, unit.index);
                report.llm_calls += 1;
                match diagnose_text(gateway, diag_template, &variant.text, tag, config) {
                    Ok(masked) => {
                        let label = if diagnosis_matches(&masked, reference, config.match_threshold) {
                            UnitLabel::C
                        } else {
                            UnitLabel::A
                        };
                        report.outcomes.push(outcome(unit, label, Some(masked), None));
                    }
                    Err(AnnotationError::Gateway(e)) => {
                        report.skipped.push(SkippedUnit { unit_index: unit.index, error: e.to_string() });
                    }
                    Err(e) => return Err(e),
                }
            }
            Strategy::S2 => {
                report.probes += 1;
                let hit = probe(kb, &unit.text, reference, config)?;
                let label = if hit { UnitLabel::B } else { UnitLabel::C };
                report.outcomes.push(outcome(unit, label, None, Some(hit)));
            }
        }
    }
    Ok(report)
}

/// Whether the top-`m` chunks for `query` include one whose parent document
/// title matches the reference diagnosis.
fn probe(kb: &KnowledgeIndex, query: &str, reference: &str, config: &AnnotationConfig) -> Result<bool, AnnotationError> {
    let hits = match kb.search(query, config.m) {
        Ok(hits) => hits,
        Err(IndexError::EmptyQuery) => return Ok(false),
        Err(e) => return Err(e.into()),
    };
    let parents: BTreeSet<&str> = hits.iter().map(|h| h.doc_id.as_str()).collect();
    let matched = parents
        .into_iter()
        .filter_map(|id| kb.doc(id))
        .any(|doc| diagnosis_matches(&doc.title, reference, config.match_threshold));
    Ok(matched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{CountingModel, MockBackend, MockRule, TemplateKind};
    use crate::index::{Bm25Params, ChunkingMode, KnowledgeDoc};
    use crate::segment::SegmentationConfig;
    use alloc::vec;

    fn units_of(text: &str) -> Vec<TextUnit> {
        segment(text, &SegmentationConfig::default()).unwrap()
    }

    #[test]
    fn masking() {
        let text = "First one. Second one. Third one.";
        let units = units_of(text);
        let v = mask_unit(text, &units, 1).unwrap();
        assert_eq!(v.text, "First one. Third one.");
        assert_eq!(v.masked_index, 1);
        assert_eq!(units_of(&v.text).len(), 2);
        assert_eq!(mask_unit(text, &units, 0).unwrap().text, "Second one. Third one.");
        assert_eq!(mask_unit(text, &units, 2).unwrap().text, "First one. Second one.");
        assert_eq!(mask_unit(text, &units, 3), Err(AnnotationError::IndexOutOfRange { index: 3, n: 3 }));
        assert_eq!(mask_unit("Only.", &units_of("Only."), 0), Err(AnnotationError::TooFewUnits(1)));
    }

    #[test]
    fn cjk_masking_keeps_separators() {
        let text = "发热三天。咳嗽；\n胸痛。";
        let units = units_of(text);
        assert_eq!(mask_unit(text, &units, 1).unwrap().text, "发热三天。胸痛。");
        assert_eq!(mask_unit(text, &units, 2).unwrap().text, "发热三天。咳嗽；");
    }

    #[test]
    fn match_rule() {
        assert!(diagnosis_matches("acute appendicitis", "acute appendicitis", 0.5));
        assert!(!diagnosis_matches("lobar pneumonia", "acute appendicitis", 0.5));
        assert!(diagnosis_matches("Diagnosis: type 2 diabetes mellitus", "type 2 diabetes", 0.5));
        assert!(diagnosis_matches("Diagnosis: gout, Acute Appendicitis", "acute appendicitis", 0.5));
        assert!(!diagnosis_matches("", "acute appendicitis", 0.5));
    }

    fn kb() -> KnowledgeIndex {
        let docs = vec![
            KnowledgeDoc::new("d1", "Acute appendicitis", "Migratory pain settling in the right iliac fossa with rebound tenderness."),
            KnowledgeDoc::new("d2", "Migraine", "Unilateral throbbing headache with photophobia."),
            KnowledgeDoc::new("d3", "Asthma", "Episodic wheeze and nocturnal dyspnea."),
        ];
        KnowledgeIndex::build(docs, ChunkingMode::Sentences { max_chunk_chars: 256 }, Bm25Params::default(), Default::default())
            .unwrap()
    }

    const RECORD: &str = "Male aged 24. Vomited twice overnight. Pain began near umbilicus. Temperature 37.9 degrees.";

    fn record() -> AnnotationRecord {
        AnnotationRecord { record_id: "r1".into(), text: RECORD.into(), reference_diagnosis: "acute appendicitis".into() }
    }

    fn template() -> PromptTemplate {
        PromptTemplate::default_for(TemplateKind::Diag)
    }

    fn labels(report: &AnnotationReport) -> Vec<UnitLabel> {
        report.outcomes.iter().map(|o| o.label).collect()
    }

    #[test]
    fn all_masks_correct_gives_all_c() {
        let gw = CountingModel::new(MockBackend::default().with_default("Diagnosis: acute appendicitis"));
        let report = annotate_record(&record(), &gw, &kb(), &template(), &AnnotationConfig::default()).unwrap();
        assert_eq!(report.strategy, Strategy::S1);
        assert_eq!(labels(&report), [UnitLabel::C; 4]);
        assert_eq!(gw.calls(), 5);
        assert!(report.outcomes.iter().all(|o| o.masked_diag.is_some() && o.probe_hit.is_none()));
    }

    #[test]
    fn masked_failures_are_skipped() {
        // Masking unit 2 removes the only pattern that has a rule.
        let gw = MockBackend::new(vec![MockRule::new("umbilicus", "Diagnosis: acute appendicitis")]);
        let report = annotate_record(&record(), &gw, &kb(), &template(), &AnnotationConfig::default()).unwrap();
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].unit_index, 2);
        assert_eq!(report.outcomes.len(), 3);
    }

    #[test]
    fn full_call_failure_fails_the_record() {
        let gw = MockBackend::default();
        let err = annotate_record(&record(), &gw, &kb(), &template(), &AnnotationConfig::default());
        assert_eq!(err, Err(AnnotationError::Gateway(LlmError::NoMatchingRule)));
    }

    #[test]
    fn single_unit_record_rejected() {
        let gw = MockBackend::default().with_default("x");
        let rec = AnnotationRecord { text: "Just one sentence.".into(), ..record() };
        assert_eq!(annotate_record(&rec, &gw, &kb(), &template(), &AnnotationConfig::default()), Err(AnnotationError::TooFewUnits(1)));
    }
}
