//! Diagnosis normalization against a terminology and set-level P / R / F1.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::similarity::{normalize, similarity};

/// Linking threshold used for evaluation and annotation matching.
pub const DEFAULT_LINK_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("terminology is empty")]
    EmptyTerminology,
    #[error("duplicate terminology code {0:?}")]
    DuplicateCode(String),
    #[error("terminology entry {0:?} has an empty canonical name")]
    EmptyCanonical(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminologyEntry {
    pub code: String,
    pub canonical: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
}

impl TerminologyEntry {
    pub fn names(&self) -> impl Iterator<Item = &str> {
        core::iter::once(self.canonical.as_str()).chain(self.synonyms.iter().map(String::as_str))
    }
}

pub fn validate_terminology(entries: &[TerminologyEntry]) -> Result<(), EvalError> {
    if entries.is_empty() {
        return Err(EvalError::EmptyTerminology);
    }
    let mut seen = BTreeSet::new();
    for e in entries {
        if e.canonical.trim().is_empty() {
            return Err(EvalError::EmptyCanonical(e.code.clone()));
        }
        if !seen.insert(e.code.as_str()) {
            return Err(EvalError::DuplicateCode(e.code.clone()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DiagnosisSet {
    pub codes: BTreeSet<String>,
    /// Mentions whose best similarity fell below the threshold.
    pub unlinked: Vec<String>,
}

impl DiagnosisSet {
    pub fn from_codes<I: IntoIterator<Item = S>, S: Into<String>>(codes: I) -> Self {
        Self { codes: codes.into_iter().map(Into::into).collect(), unlinked: Vec::new() }
    }
}

const DELIMITERS: [char; 6] = [',', '，', ';', '；', '、', '\n'];
const LIST_MARKER_ENDS: [char; 4] = ['.', ')', '、', '．'];

/// Strips a short leading `Diagnosis:`-style header.
fn strip_header(text: &str) -> &str {
    let Some((at, colon)) = text.char_indices().find(|&(_, c)| c == ':' || c == '：') else {
        return text;
    };
    let prefix = &text[..at];
    let is_header = prefix.chars().count() <= 40
        && !prefix.contains('\n')
        && (normalize(prefix).contains("diagnos") || prefix.contains("诊断"));
    if is_header {
        &text[at + colon.len_utf8()..]
    } else {
        text
    }
}

/// Disease mentions in a diagnosis string.
pub fn extract_mentions(text: &str) -> Vec<String> {
    let body: Vec<char> = strip_header(text).chars().collect();
    let mut mentions = Vec::new();
    let mut current = String::new();
    let flush = |current: &mut String, mentions: &mut Vec<String>| {
        let m = current.trim().trim_end_matches(['.', '。']).trim();
        if !m.is_empty() {
            mentions.push(m.into());
        }
        current.clear();
    };
    let mut i = 0;
    while i < body.len() {
        let c = body[i];
        if DELIMITERS.contains(&c) {
            flush(&mut current, &mut mentions);
            i += 1;
            continue;
        }
        let at_token_start = i == 0 || body[i - 1].is_whitespace() || DELIMITERS.contains(&body[i - 1]);
        if at_token_start && c.is_ascii_digit() {
            let mut j = i;
            while j < body.len() && body[j].is_ascii_digit() {
                j += 1;
            }
            let is_marker = j < body.len()
                && LIST_MARKER_ENDS.contains(&body[j])
                && body.get(j + 1).is_none_or(|n| !n.is_ascii_digit());
            if is_marker {
                flush(&mut current, &mut mentions);
                i = j + 1;
                continue;
            }
        }
        current.push(c);
        i += 1;
    }
    flush(&mut current, &mut mentions);
    mentions
}

/// Best terminology match for `mention`: `(entry position, similarity)`.
/// Ties keep the earlier entry.
pub fn best_match(mention: &str, terminology: &[TerminologyEntry]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, entry) in terminology.iter().enumerate() {
        let score = entry.names().map(|n| similarity(mention, n)).fold(f64::NEG_INFINITY, f64::max);
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((i, score));
        }
    }
    best
}

/// Links each mention to its most similar entry, keeping those at or above
/// `threshold`.
pub fn link(mentions: &[String], terminology: &[TerminologyEntry], threshold: f64) -> Result<DiagnosisSet, EvalError> {
    if terminology.is_empty() {
        return Err(EvalError::EmptyTerminology);
    }
    let mut set = DiagnosisSet::default();
    for m in mentions {
        match best_match(m, terminology) {
            Some((i, score)) if score >= threshold => {
                set.codes.insert(terminology[i].code.clone());
            }
            _ => set.unlinked.push(m.clone()),
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_records: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn from_counts(overlap: usize, n_pred: usize, n_ref: usize, n_records: usize) -> EvalMetrics {
    let precision = ratio(overlap, n_pred);
    let recall = ratio(overlap, n_ref);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    EvalMetrics { precision, recall, f1, n_records }
}

/// Set-level metrics for one record.
pub fn metrics(pred: &DiagnosisSet, reference: &DiagnosisSet) -> EvalMetrics {
    let overlap = pred.codes.intersection(&reference.codes).count();
    from_counts(overlap, pred.codes.len(), reference.codes.len(), 1)
}

/// Micro-averaged corpus metrics over summed set sizes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsAccumulator {
    pub overlap: usize,
    pub predicted: usize,
    pub reference: usize,
    pub records: usize,
}

impl MetricsAccumulator {
    pub fn add(&mut self, pred: &DiagnosisSet, reference: &DiagnosisSet) -> EvalMetrics {
        let overlap = pred.codes.intersection(&reference.codes).count();
        self.overlap += overlap;
        self.predicted += pred.codes.len();
        self.reference += reference.codes.len();
        self.records += 1;
        from_counts(overlap, pred.codes.len(), reference.codes.len(), 1)
    }

    pub fn finish(&self) -> EvalMetrics {
        from_counts(self.overlap, self.predicted, self.reference, self.records)
    }
}

/// Terminology lookup by code.
pub fn by_code(entries: &[TerminologyEntry]) -> BTreeMap<&str, &TerminologyEntry> {
    entries.iter().map(|e| (e.code.as_str(), e)).collect()
}
