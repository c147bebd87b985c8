//! Versioned on-disk formats for trained models and built indexes.
//!
//! Both are single JSON documents of the form
//! `{"format": <name>, "version": <n>, "payload": {...}}`. Floats round-trip
//! exactly, so a reloaded model predicts bit-identically.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use adaptrag_core::classifier::ModelMetadata;
use adaptrag_core::{ClassifierModel, FeatureSpace, KnowledgeIndex};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "adaptrag-classifier";
pub const INDEX_FORMAT: &str = "adaptrag-index";
pub const FORMAT_VERSION: u32 = 1;
/// Guards against allocating absurd weight vectors from a corrupt file.
const MAX_DIMENSION: usize = 1 << 24;

#[derive(Serialize)]
struct Envelope<'a, T> {
    format: &'a str,
    version: u32,
    payload: &'a T,
}

/// Model weights are mostly zero at 2^18 buckets; only non-zeros are stored.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredModel {
    feature_space: FeatureSpace,
    bias: [f64; 3],
    weights: [Vec<(u32, f64)>; 3],
    metadata: ModelMetadata,
}

fn write_atomic(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let mut w = BufWriter::new(file);
    write(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&tmp, e))?;
    drop(w);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn save<T: Serialize>(path: &Path, format: &str, payload: &T) -> Result<()> {
    let envelope = Envelope { format, version: FORMAT_VERSION, payload };
    write_atomic(path, |w| serde_json::to_writer(w, &envelope).map_err(std::io::Error::from))
}

fn load<T: DeserializeOwned>(path: &Path, format: &str) -> Result<T> {
    let mismatch = |message: String| Error::SchemaMismatch { path: path.into(), message };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut value: Value = serde_json::from_reader(BufReader::new(file)).map_err(|e| mismatch(e.to_string()))?;
    let found = value.get("format").and_then(Value::as_str).unwrap_or_default();
    if found != format {
        return Err(mismatch(format!("expected format {format:?}, found {found:?}")));
    }
    match value.get("version").and_then(Value::as_u64) {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        other => return Err(mismatch(format!("unsupported version {other:?}, expected {FORMAT_VERSION}"))),
    }
    let payload = value.get_mut("payload").map(Value::take).ok_or_else(|| mismatch("missing payload".into()))?;
    serde_json::from_value(payload).map_err(|e| mismatch(e.to_string()))
}

pub fn save_model(path: &Path, model: &ClassifierModel) -> Result<()> {
    let sparse = |w: &Vec<f64>| w.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i as u32, *v)).collect();
    let stored = StoredModel {
        feature_space: model.feature_space.clone(),
        bias: model.bias,
        weights: [sparse(&model.weights[0]), sparse(&model.weights[1]), sparse(&model.weights[2])],
        metadata: model.metadata.clone(),
    };
    save(path, MODEL_FORMAT, &stored)
}

pub fn load_model(path: &Path) -> Result<ClassifierModel> {
    let stored: StoredModel = load(path, MODEL_FORMAT)?;
    let mismatch = |message: String| Error::SchemaMismatch { path: path.into(), message };
    if stored.feature_space.dimension > MAX_DIMENSION {
        return Err(mismatch(format!("hash dimension {} exceeds {MAX_DIMENSION}", stored.feature_space.dimension)));
    }
    let mut model = ClassifierModel::zeros(stored.feature_space);
    model.validate().map_err(|e| mismatch(e.to_string()))?;
    let dim = model.weights[0].len();
    for (dense, entries) in model.weights.iter_mut().zip(stored.weights) {
        for (i, v) in entries {
            let slot = dense.get_mut(i as usize).ok_or_else(|| mismatch(format!("weight index {i} outside dimension {dim}")))?;
            *slot = v;
        }
    }
    model.bias = stored.bias;
    model.metadata = stored.metadata;
    Ok(model)
}

pub fn save_index(path: &Path, index: &KnowledgeIndex) -> Result<()> {
    save(path, INDEX_FORMAT, index)
}

pub fn load_index(path: &Path) -> Result<KnowledgeIndex> {
    let index: KnowledgeIndex = load(path, INDEX_FORMAT)?;
    let n = index.index.chunks.len();
    if n != index.chunks.len() || index.index.postings.values().flatten().any(|p| p.chunk as usize >= n) {
        return Err(Error::SchemaMismatch { path: path.into(), message: "inconsistent chunk table".into() });
    }
    Ok(index)
}
