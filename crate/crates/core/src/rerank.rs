//! Query selection, chunk gathering, and chunk-count document reranking.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::classifier::{LabeledUnit, UnitLabel};
use crate::index::{IndexError, KnowledgeIndex};
use crate::segment::TextUnit;

pub use crate::index::ChunkHit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocScore {
    pub doc_id: String,
    /// Number of distinct retrieved chunks from this document.
    pub s_doc: usize,
    pub best_chunk_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySelection {
    pub queries: Vec<TextUnit>,
    /// Set when no unit was labeled A or B and every unit became a query.
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RerankMode {
    /// By retrieved-chunk count, then best chunk score, then doc id.
    #[default]
    ChunkCount,
    /// By best chunk score, then doc id.
    BestChunkScore,
}

/// Units labeled A or B, in record order; all units when none qualify.
pub fn select_queries(labeled: &[LabeledUnit]) -> QuerySelection {
    let queries: Vec<TextUnit> = labeled
        .iter()
        .filter(|l| matches!(l.label, UnitLabel::A | UnitLabel::B))
        .map(|l| l.unit.clone())
        .collect();
    if queries.is_empty() {
        QuerySelection { queries: labeled.iter().map(|l| l.unit.clone()).collect(), fallback: true }
    } else {
        QuerySelection { queries, fallback: false }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Gathered {
    /// Merged hits, one per chunk id, ordered by chunk id.
    pub hits: Vec<ChunkHit>,
    /// Searches issued against the index.
    pub searches: usize,
    /// Queries that tokenized to nothing.
    pub empty_queries: usize,
}

/// Union of the per-query top-`m` hits, de-duplicated by chunk id. A chunk
/// hit by several queries keeps its highest score and that query's index
/// (earliest query on equal scores).
pub fn gather(queries: &[TextUnit], index: &KnowledgeIndex, m: usize) -> Result<Gathered, IndexError> {
    let mut merged: BTreeMap<String, ChunkHit> = BTreeMap::new();
    let mut out = Gathered::default();
    for (qi, query) in queries.iter().enumerate() {
        out.searches += 1;
        let hits = match index.search(&query.text, m) {
            Ok(hits) => hits,
            Err(IndexError::EmptyQuery) => {
                out.empty_queries += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        for mut hit in hits {
            hit.query_index = qi;
            match merged.get_mut(&hit.chunk_id) {
                Some(existing) if hit.score > existing.score => *existing = hit,
                Some(_) => {}
                None => {
                    merged.insert(hit.chunk_id.clone(), hit);
                }
            }
        }
    }
    out.hits = merged.into_values().collect();
    Ok(out)
}

/// Per-document scores over a merged hit set (chunk ids assumed distinct).
pub fn score_docs(hits: &[ChunkHit]) -> Vec<DocScore> {
    let mut by_doc: BTreeMap<&str, DocScore> = BTreeMap::new();
    for h in hits {
        by_doc
            .entry(h.doc_id.as_str())
            .and_modify(|d| {
                d.s_doc += 1;
                d.best_chunk_score = d.best_chunk_score.max(h.score);
            })
            .or_insert_with(|| DocScore { doc_id: h.doc_id.clone(), s_doc: 1, best_chunk_score: h.score });
    }
    by_doc.into_values().collect()
}

fn compare(mode: RerankMode, a: &DocScore, b: &DocScore) -> Ordering {
    let by_count = match mode {
        RerankMode::ChunkCount => b.s_doc.cmp(&a.s_doc),
        RerankMode::BestChunkScore => Ordering::Equal,
    };
    by_count
        .then_with(|| b.best_chunk_score.total_cmp(&a.best_chunk_score))
        .then_with(|| a.doc_id.cmp(&b.doc_id))
}

/// Top-`k` documents for the merged hits.
pub fn rerank_docs(hits: &[ChunkHit], k: usize, mode: RerankMode) -> Vec<DocScore> {
    let mut docs = score_docs(hits);
    docs.sort_by(|a, b| compare(mode, a, b));
    docs.truncate(k);
    docs
}
