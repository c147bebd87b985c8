//! Inverted index with Okapi BM25 scoring.
//!
//! `idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1)`, which is never negative.
//! Query terms are treated as a set.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{tokenize, Chunk, ChunkHit, IndexError, TokenizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), IndexError> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(IndexError::InvalidParams("k1 must be positive"));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(IndexError::InvalidParams("b must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    /// Position in [`InvertedIndex::chunks`].
    pub chunk: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkMeta {
    pub chunk_id: String,
    pub doc_id: String,
    /// Token count.
    pub len: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    pub params: Bm25Params,
    pub tokenizer: TokenizerConfig,
    /// Postings sorted by chunk position.
    pub postings: BTreeMap<String, Vec<Posting>>,
    pub chunks: Vec<ChunkMeta>,
    pub avg_len: f64,
}

impl InvertedIndex {
    pub fn num_chunks(&self) -> usize {
        self.chunks.len()
    }

    /// Number of chunks containing `term`.
    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.chunks.len() as f64;
        let df = self.doc_freq(term) as f64;
        libm::log((n - df + 0.5) / (df + 0.5) + 1.0)
    }
}

pub fn build_index(chunks: &[Chunk], params: Bm25Params, tokenizer: TokenizerConfig) -> Result<InvertedIndex, IndexError> {
    params.validate()?;
    if chunks.is_empty() {
        return Err(IndexError::EmptyCorpus);
    }
    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    let mut metas = Vec::with_capacity(chunks.len());
    let mut total = 0u64;
    for (pos, chunk) in chunks.iter().enumerate() {
        let tokens = tokenize(&chunk.text, &tokenizer);
        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for t in &tokens {
            *tf.entry(t.clone()).or_default() += 1;
        }
        for (term, count) in tf {
            postings.entry(term).or_default().push(Posting { chunk: pos as u32, tf: count });
        }
        total += tokens.len() as u64;
        metas.push(ChunkMeta { chunk_id: chunk.chunk_id.clone(), doc_id: chunk.doc_id.clone(), len: tokens.len() as u32 });
    }
    let avg_len = total as f64 / chunks.len() as f64;
    Ok(InvertedIndex { params, tokenizer, postings, chunks: metas, avg_len })
}

/// Top-`m` chunks by BM25 score. Zero-score chunks are never returned; ties
/// are broken by ascending chunk id.
pub fn search(index: &InvertedIndex, query: &str, m: usize) -> Result<Vec<ChunkHit>, IndexError> {
    if m == 0 {
        return Err(IndexError::InvalidParams("m must be at least 1"));
    }
    let terms: BTreeSet<String> = tokenize(query, &index.tokenizer).into_iter().collect();
    if terms.is_empty() {
        return Err(IndexError::EmptyQuery);
    }
    let Bm25Params { k1, b } = index.params;
    let mut scores = vec![0.0f64; index.chunks.len()];
    for term in &terms {
        let Some(list) = index.postings.get(term) else { continue };
        let idf = index.idf(term);
        for p in list {
            let tf = f64::from(p.tf);
            let len = f64::from(index.chunks[p.chunk as usize].len);
            let norm = 1.0 - b + b * len / index.avg_len;
            scores[p.chunk as usize] += idf * (tf * (k1 + 1.0)) / (tf + k1 * norm);
        }
    }
    let mut ranked: Vec<(usize, f64)> = scores.into_iter().enumerate().filter(|&(_, s)| s > 0.0).collect();
    ranked.sort_by(|a, b| {
        b.1.total_cmp(&a.1).then_with(|| index.chunks[a.0].chunk_id.cmp(&index.chunks[b.0].chunk_id))
    });
    ranked.truncate(m);
    Ok(ranked
        .into_iter()
        .map(|(pos, score)| {
            let meta = &index.chunks[pos];
            ChunkHit { chunk_id: meta.chunk_id.clone(), doc_id: meta.doc_id.clone(), score, query_index: 0 }
        })
        .collect())
}
