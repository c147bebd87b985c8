//! End-to-end diagnosis of one record with a full stage trace.
//!
//! segment -> classify -> completeness -> route, then either a direct
//! diagnosis call, or query selection -> chunk retrieval -> document rerank ->
//! differential filter -> grounded diagnosis call. Routing itself never calls
//! the language model.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{UnitClassifier, UnitLabel};
use crate::completeness::{compute_completeness, route, CompletenessWeights, RoutingDecision, RoutingThresholds};
use crate::filter::{filter_docs, FilterVerdict};
use crate::gateway::{join_documents, render, LanguageModel, LlmRequest, PromptTemplate, Templates};
use crate::index::{Bm25Params, ChunkingMode, IndexError, KnowledgeDoc, KnowledgeIndex, TokenizerConfig, MIN_CHUNK_CHARS};
use crate::rerank::{gather, rerank_docs, select_queries, DocScore, RerankMode};
use crate::segment::{segment, SegmentationConfig};

/// Module switches used for ablations. All on by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Toggles {
    /// Off: every record is retrieved for.
    pub decision_enabled: bool,
    /// Off: each document is indexed as a single chunk.
    pub chunking_enabled: bool,
    /// Off: documents are ranked by their best chunk score only.
    pub mapping_rerank_enabled: bool,
    /// Off: every reranked document is kept.
    pub diff_filter_enabled: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self { decision_enabled: true, chunking_enabled: true, mapping_rerank_enabled: true, diff_filter_enabled: true }
    }
}

/// Retrieval policy for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Route by information completeness.
    Adaptive,
    /// Always retrieve.
    Always,
    /// Never retrieve.
    Never,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Adaptive, Policy::Always, Policy::Never];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Adaptive => "adaptive",
            Policy::Always => "always",
            Policy::Never => "never",
        }
    }
}

impl core::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adaptive" => Ok(Policy::Adaptive),
            "always" => Ok(Policy::Always),
            "never" => Ok(Policy::Never),
            other => Err(format!("unknown policy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub weights: CompletenessWeights,
    pub thresholds: RoutingThresholds,
    pub segmentation: SegmentationConfig,
    /// Chunks retrieved per query.
    pub m: usize,
    /// Documents kept after reranking.
    pub k: usize,
    pub max_chunk_chars: usize,
    pub bm25: Bm25Params,
    pub tokenizer: TokenizerConfig,
    pub toggles: Toggles,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            weights: CompletenessWeights::default(),
            thresholds: RoutingThresholds::default(),
            segmentation: SegmentationConfig::default(),
            m: 5,
            k: 3,
            max_chunk_chars: 256,
            bm25: Bm25Params::default(),
            tokenizer: TokenizerConfig::default(),
            toggles: Toggles::default(),
            temperature: 0.0,
            max_tokens: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid pipeline config: {0}")]
pub struct ConfigError(pub String);

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |e: &dyn core::fmt::Display| ConfigError(e.to_string());
        self.weights.validate().map_err(|e| err(&e))?;
        self.thresholds.validate().map_err(|e| err(&e))?;
        self.segmentation.validate().map_err(|e| err(&e))?;
        self.bm25.validate().map_err(|e| err(&e))?;
        if self.m == 0 || self.k == 0 {
            return Err(ConfigError("m and k must be at least 1".into()));
        }
        if self.max_chunk_chars < MIN_CHUNK_CHARS {
            return Err(ConfigError(format!("max_chunk_chars must be at least {MIN_CHUNK_CHARS}")));
        }
        if !(self.temperature >= 0.0) || self.max_tokens == 0 {
            return Err(ConfigError("temperature must be >= 0 and max_tokens positive".into()));
        }
        Ok(())
    }

    pub fn chunking_mode(&self) -> ChunkingMode {
        if self.toggles.chunking_enabled {
            ChunkingMode::Sentences { max_chunk_chars: self.max_chunk_chars }
        } else {
            ChunkingMode::WholeDocument
        }
    }

    pub fn rerank_mode(&self) -> RerankMode {
        if self.toggles.mapping_rerank_enabled {
            RerankMode::ChunkCount
        } else {
            RerankMode::BestChunkScore
        }
    }

    /// Policy implied by the decision toggle.
    pub fn policy(&self) -> Policy {
        if self.toggles.decision_enabled {
            Policy::Adaptive
        } else {
            Policy::Always
        }
    }

    /// Builds an index whose chunking matches this config.
    pub fn build_index(&self, docs: impl IntoIterator<Item = KnowledgeDoc>) -> Result<KnowledgeIndex, IndexError> {
        KnowledgeIndex::build(docs, self.chunking_mode(), self.bm25, self.tokenizer.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Segment,
    Classify,
    Route,
    Retrieve,
    Filter,
    Generate,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("record {record_id:?} failed at {stage:?}: {message}")]
pub struct PipelineError {
    pub record_id: String,
    pub stage: Stage,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CallCounts {
    pub llm_calls: usize,
    pub retriever_queries: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FallbackFlags {
    /// No unit was labeled A or B, so every unit served as a query.
    pub query_fallback: bool,
    /// The filter kept no documents; the grounded call saw no evidence.
    pub empty_evidence: bool,
    pub unparseable_verdicts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum OutcomeStatus {
    Completed,
    Failed { stage: Stage, error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisOutcome {
    pub record_id: String,
    pub status: OutcomeStatus,
    pub final_diagnosis: String,
    pub route: RoutingDecision,
    pub i_norm: f64,
    pub labels: Vec<UnitLabel>,
    /// Indices of the units used as retrieval queries.
    pub queries_used: Vec<usize>,
    /// Reranked document ids, best first.
    pub retrieved_docs: Vec<String>,
    pub doc_scores: Vec<DocScore>,
    /// Documents kept by the filter, in rerank order.
    pub kept_docs: Vec<String>,
    pub verdicts: Vec<FilterVerdict>,
    pub warning: bool,
    pub fallback_flags: FallbackFlags,
    pub call_counts: CallCounts,
}

impl DiagnosisOutcome {
    pub fn is_completed(&self) -> bool {
        self.status == OutcomeStatus::Completed
    }
}

/// Shared, read-only components of a run.
pub struct Engine<'a> {
    pub config: &'a PipelineConfig,
    pub classifier: &'a dyn UnitClassifier,
    pub index: &'a KnowledgeIndex,
    pub gateway: &'a dyn LanguageModel,
    pub templates: &'a Templates,
}

impl<'a> Engine<'a> {
    /// Validates the config and checks that the index was chunked the way the
    /// chunking toggle asks for.
    pub fn new(
        config: &'a PipelineConfig,
        classifier: &'a dyn UnitClassifier,
        index: &'a KnowledgeIndex,
        gateway: &'a dyn LanguageModel,
        templates: &'a Templates,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        let whole = matches!(index.mode, ChunkingMode::WholeDocument);
        if whole == config.toggles.chunking_enabled {
            return Err(ConfigError(format!(
                "index chunking {:?} does not match chunking_enabled = {}",
                index.mode, config.toggles.chunking_enabled
            )));
        }
        Ok(Self { config, classifier, index, gateway, templates })
    }

    pub fn diagnose(&self, record_id: &str, text: &str) -> Result<DiagnosisOutcome, PipelineError> {
        diagnose(self, record_id, text, self.config.policy())
    }
}

fn complete(engine: &Engine<'_>, template: &PromptTemplate, bindings: &BTreeMap<&str, &str>, tag: String) -> Result<String, String> {
    let prompt = render(template, bindings).map_err(|e| e.to_string())?;
    let request = LlmRequest::new(prompt, tag).with_generation(engine.config.temperature, engine.config.max_tokens);
    engine.gateway.complete(&request).map(|r| r.text).map_err(|e| e.to_string())
}

fn document_block(doc: &KnowledgeDoc) -> String {
    format!("{}\n{}", doc.title, doc.body)
}

/// Diagnoses one record under `policy`.
pub fn diagnose(engine: &Engine<'_>, record_id: &str, text: &str, policy: Policy) -> Result<DiagnosisOutcome, PipelineError> {
    let fail = |stage, message: String| PipelineError { record_id: record_id.into(), stage, message };
    let config = engine.config;

    let units = segment(text, &config.segmentation).map_err(|e| fail(Stage::Segment, e.to_string()))?;
    let labeled = engine.classifier.classify(&units).map_err(|e| fail(Stage::Classify, e.to_string()))?;
    if labeled.len() != units.len() {
        return Err(fail(Stage::Classify, format!("classifier returned {} labels for {} units", labeled.len(), units.len())));
    }
    let labels: Vec<UnitLabel> = labeled.iter().map(|l| l.label).collect();
    let i_norm = compute_completeness(&labels, &config.weights).map_err(|e| fail(Stage::Route, e.to_string()))?;
    let adaptive = route(i_norm, &config.thresholds);
    let decision = match policy {
        Policy::Adaptive => adaptive,
        Policy::Never => RoutingDecision::Direct,
        Policy::Always if adaptive == RoutingDecision::Direct => RoutingDecision::Retrieve,
        Policy::Always => adaptive,
    };

    let mut outcome = DiagnosisOutcome {
        record_id: record_id.into(),
        status: OutcomeStatus::Completed,
        final_diagnosis: String::new(),
        route: decision,
        i_norm,
        labels,
        queries_used: Vec::new(),
        retrieved_docs: Vec::new(),
        doc_scores: Vec::new(),
        kept_docs: Vec::new(),
        verdicts: Vec::new(),
        warning: decision == RoutingDecision::RetrieveWithWarning,
        fallback_flags: FallbackFlags::default(),
        call_counts: CallCounts::default(),
    };

    let reply = if decision == RoutingDecision::Direct {
        outcome.call_counts.llm_calls += 1;
        let bindings: BTreeMap<&str, &str> = [("patient", text)].into();
        complete(engine, &engine.templates.diag, &bindings, format!("diag:{record_id}"))
    } else {
        let selection = select_queries(&labeled);
        outcome.queries_used = selection.queries.iter().map(|u| u.index).collect();
        outcome.fallback_flags.query_fallback = selection.fallback;

        let gathered = gather(&selection.queries, engine.index, config.m).map_err(|e| fail(Stage::Retrieve, e.to_string()))?;
        outcome.call_counts.retriever_queries = gathered.searches;
        outcome.doc_scores = rerank_docs(&gathered.hits, config.k, config.rerank_mode());
        outcome.retrieved_docs = outcome.doc_scores.iter().map(|d| d.doc_id.clone()).collect();
        let docs: Vec<KnowledgeDoc> = outcome
            .retrieved_docs
            .iter()
            .map(|id| engine.index.doc(id).cloned().ok_or_else(|| fail(Stage::Retrieve, format!("chunk parent {id:?} missing from index"))))
            .collect::<Result<_, _>>()?;

        let kept = if config.toggles.diff_filter_enabled {
            let filtered = filter_docs(text, &docs, engine.gateway, &engine.templates.diff, (config.temperature, config.max_tokens));
            outcome.call_counts.llm_calls += filtered.llm_calls;
            outcome.fallback_flags.unparseable_verdicts = filtered.unparseable();
            outcome.verdicts = filtered.verdicts;
            filtered.kept
        } else {
            docs
        };
        outcome.kept_docs = kept.iter().map(|d| d.doc_id.clone()).collect();
        outcome.fallback_flags.empty_evidence = kept.is_empty();

        let blocks: Vec<String> = kept.iter().map(document_block).collect();
        let evidence = join_documents(blocks.iter().map(String::as_str));
        let bindings: BTreeMap<&str, &str> = [("patient", text), ("documents", evidence.as_str())].into();
        outcome.call_counts.llm_calls += 1;
        complete(engine, &engine.templates.rag, &bindings, format!("rag:{record_id}"))
    };

    match reply {
        Ok(text) => outcome.final_diagnosis = text,
        Err(error) => outcome.status = OutcomeStatus::Failed { stage: Stage::Generate, error },
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut c = PipelineConfig::default();
        c.thresholds.theta1 = 1.2;
        assert!(c.validate().is_err());
        let c = PipelineConfig { k: 0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = PipelineConfig { max_chunk_chars: 10, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn toggles_map_to_modes() {
        let mut c = PipelineConfig::default();
        assert_eq!(c.policy(), Policy::Adaptive);
        assert_eq!(c.chunking_mode(), ChunkingMode::Sentences { max_chunk_chars: 256 });
        c.toggles = Toggles { decision_enabled: false, chunking_enabled: false, mapping_rerank_enabled: false, diff_filter_enabled: true };
        assert_eq!(c.policy(), Policy::Always);
        assert_eq!(c.chunking_mode(), ChunkingMode::WholeDocument);
        assert_eq!(c.rerank_mode(), RerankMode::BestChunkScore);
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("never".parse::<Policy>(), Ok(Policy::Never));
        assert!("sometimes".parse::<Policy>().is_err());
    }
}
