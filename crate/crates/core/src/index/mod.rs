//! Knowledge base ingestion and BM25 chunk retrieval.

mod bm25;
mod chunk;
mod tokenize;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bm25::{build_index, search, Bm25Params, ChunkMeta, InvertedIndex, Posting};
pub use chunk::{chunk_document, whole_document_chunk, Chunk, ChunkingMode, KnowledgeDoc, MIN_CHUNK_CHARS};
pub use tokenize::{is_cjk, tokenize, TokenizerConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("cannot build an index from an empty corpus")]
    EmptyCorpus,
    #[error("query has no searchable terms")]
    EmptyQuery,
    #[error("document {0:?} needs a non-empty id, title and body")]
    InvalidDoc(String),
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
    #[error("invalid index parameters: {0}")]
    InvalidParams(&'static str),
}

/// A retrieved chunk with its parent document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkHit {
    pub chunk_id: String,
    pub doc_id: String,
    pub score: f64,
    /// Which query produced the hit.
    pub query_index: usize,
}

/// Documents, their chunks, and the inverted index over the chunks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeIndex {
    pub mode: ChunkingMode,
    pub docs: BTreeMap<String, KnowledgeDoc>,
    pub chunks: Vec<Chunk>,
    pub index: InvertedIndex,
}

impl KnowledgeIndex {
    pub fn build(
        docs: impl IntoIterator<Item = KnowledgeDoc>,
        mode: ChunkingMode,
        params: Bm25Params,
        tokenizer: TokenizerConfig,
    ) -> Result<Self, IndexError> {
        let mut by_id = BTreeMap::new();
        let mut chunks = Vec::new();
        for doc in docs {
            doc.validate()?;
            match mode {
                ChunkingMode::Sentences { max_chunk_chars } => chunks.extend(chunk_document(&doc, max_chunk_chars)?),
                ChunkingMode::WholeDocument => chunks.push(whole_document_chunk(&doc)?),
            }
            if by_id.contains_key(&doc.doc_id) {
                return Err(IndexError::DuplicateDocId(doc.doc_id));
            }
            by_id.insert(doc.doc_id.clone(), doc);
        }
        let index = build_index(&chunks, params, tokenizer)?;
        Ok(Self { mode, docs: by_id, chunks, index })
    }

    pub fn search(&self, query: &str, m: usize) -> Result<Vec<ChunkHit>, IndexError> {
        search(&self.index, query, m)
    }

    pub fn doc(&self, doc_id: &str) -> Option<&KnowledgeDoc> {
        self.docs.get(doc_id)
    }

    pub fn chunk(&self, chunk_id: &str) -> Option<&Chunk> {
        self.chunks.iter().find(|c| c.chunk_id == chunk_id)
    }
}
