//! Core of an adaptive retrieval-augmented diagnosis engine.
//!
//! The crate scores how complete a patient record is at sentence granularity,
//! decides whether knowledge retrieval is needed, retrieves and reranks
//! knowledge-base documents through chunk-to-document mapping, filters the
//! retrieved documents with a differential-diagnosis verdict, and produces the
//! masking-based annotations used to train the sentence importance classifier.
//!
//! Everything here is `no_std` + `alloc`. File formats, HTTP backends, the
//! batch runner and the command line live in the `adaptrag` companion crate.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod annotation;
pub mod classifier;
pub mod completeness;
pub mod eval;
pub mod filter;
pub mod gateway;
pub mod index;
pub mod pipeline;
pub mod rerank;
pub mod segment;
pub mod similarity;

pub use annotation::{
    annotate_record, diagnosis_matches, mask_unit, AnnotationConfig, AnnotationError,
    AnnotationOutcome, AnnotationRecord, AnnotationReport, MaskedVariant, Strategy,
};
pub use classifier::{
    featurize, predict, predict_batch, train, ClassifierModel, ClassifyError, FeatureSpace,
    LabeledUnit, SparseVector, TrainError, TrainingExample, TrainingParams, UnitClassifier,
    UnitLabel,
};
pub use completeness::{
    compute_completeness, route, CompletenessError, CompletenessReport, CompletenessWeights,
    RoutingDecision, RoutingThresholds,
};
pub use eval::{
    extract_mentions, link, metrics, DiagnosisSet, EvalError, EvalMetrics, MetricsAccumulator,
    TerminologyEntry,
};
pub use filter::{filter_docs, parse_verdict, FilterOutcome, FilterVerdict, ParseStatus};
pub use gateway::{
    render, Backend, CountingModel, LanguageModel, LlmError, LlmRequest, LlmResponse,
    MockBackend, MockRule, PromptTemplate, TemplateError, TemplateKind, Templates,
};
pub use index::{
    build_index, chunk_document, search, tokenize, Bm25Params, Chunk, ChunkHit, ChunkingMode,
    IndexError, InvertedIndex, KnowledgeDoc, KnowledgeIndex, TokenizerConfig,
};
pub use pipeline::{
    diagnose, CallCounts, DiagnosisOutcome, Engine, FallbackFlags, OutcomeStatus, PipelineConfig,
    PipelineError, Policy, Stage, Toggles,
};
pub use rerank::{gather, rerank_docs, select_queries, DocScore, QuerySelection, RerankMode};
pub use segment::{segment, SegmentError, SegmentationConfig, Span, TextUnit};
