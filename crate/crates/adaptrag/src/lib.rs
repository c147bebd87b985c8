//! Std companion to `adaptrag-core`: JSONL formats, versioned model and index
//! files, the HTTP chat-completion and remote-classifier backends, batch
//! execution, and the `adaptrag` command line.

pub mod annotate;
pub mod batch;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod formats;
pub mod http;
pub mod persist;
pub mod remote;
pub mod runtime;

pub use adaptrag_core as core;

pub use annotate::{annotate_batch, AnnotationRun, RecordFailure};
pub use batch::{bench, par_map, run_batch, write_bench_csv, BatchReport, BatchSummary, BenchRow};
pub use config::{AppConfig, BackendKind, ClassifierConfig, GatewayConfig, TemplatePaths};
pub use error::{Error, Result};
pub use evaluate::{evaluate, write_record_csv, EvalReport, RecordEval};
pub use formats::{EmrRecord, Prediction};
pub use http::{HttpBackend, Limited, Limiter};
pub use persist::{load_index, load_model, save_index, save_model};
pub use remote::RemoteClassifier;
pub use runtime::{build_classifier, build_gateway};
