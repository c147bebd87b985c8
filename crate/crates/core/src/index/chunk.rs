//! Sentence-aligned, length-bounded chunking of knowledge documents.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::IndexError;
use crate::segment::{segment, SegmentationConfig, Span};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeDoc {
    pub doc_id: String,
    /// Disease name.
    pub title: String,
    pub body: String,
}

impl KnowledgeDoc {
    pub fn new(doc_id: impl Into<String>, title: impl Into<String>, body: impl Into<String>) -> Self {
        Self { doc_id: doc_id.into(), title: title.into(), body: body.into() }
    }

    pub fn validate(&self) -> Result<(), IndexError> {
        if self.doc_id.trim().is_empty() || self.title.trim().is_empty() || self.body.trim().is_empty() {
            return Err(IndexError::InvalidDoc(self.doc_id.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub text: String,
    /// First and last sentence index (inclusive) inside the parent body.
    pub sentence_range: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ChunkingMode {
    /// Greedy sentence packing up to `max_chunk_chars`.
    Sentences { max_chunk_chars: usize },
    /// One chunk per document.
    WholeDocument,
}

pub const MIN_CHUNK_CHARS: usize = 32;

fn chunk_id(doc_id: &str, ordinal: usize) -> String {
    format!("{doc_id}#{ordinal:04}")
}

fn sentence_spans(body: &str) -> Vec<Span> {
    let config = SegmentationConfig { max_unit_chars: usize::MAX, ..Default::default() };
    segment(body, &config).map(|units| units.into_iter().map(|u| u.span).collect()).unwrap_or_default()
}

/// Packs sentences greedily into chunks of at most `max_chunk_chars` chars.
/// A sentence longer than the limit is hard-split into its own chunks.
pub fn chunk_document(doc: &KnowledgeDoc, max_chunk_chars: usize) -> Result<Vec<Chunk>, IndexError> {
    if max_chunk_chars < MIN_CHUNK_CHARS {
        return Err(IndexError::InvalidParams("max_chunk_chars must be at least 32"));
    }
    doc.validate()?;
    let chars: Vec<char> = doc.body.chars().collect();
    let spans = sentence_spans(&doc.body);

    let mut chunks = Vec::new();
    let emit = |chunks: &mut Vec<Chunk>, span: Span, range: (usize, usize)| {
        chunks.push(Chunk {
            chunk_id: chunk_id(&doc.doc_id, chunks.len()),
            doc_id: doc.doc_id.clone(),
            text: chars[span.start..span.end].iter().collect(),
            sentence_range: range,
        });
    };

    // (span of the open chunk, first sentence index)
    let mut open: Option<(Span, usize)> = None;
    for (i, s) in spans.iter().enumerate() {
        if s.len() > max_chunk_chars {
            if let Some((span, first)) = open.take() {
                emit(&mut chunks, span, (first, i - 1));
            }
            let mut start = s.start;
            while start < s.end {
                let end = (start + max_chunk_chars).min(s.end);
                emit(&mut chunks, Span { start, end }, (i, i));
                start = end;
            }
            continue;
        }
        open = match open {
            Some((span, first)) if s.end - span.start <= max_chunk_chars => {
                Some((Span { start: span.start, end: s.end }, first))
            }
            Some((span, first)) => {
                emit(&mut chunks, span, (first, i - 1));
                Some((*s, i))
            }
            None => Some((*s, i)),
        };
    }
    if let Some((span, first)) = open {
        emit(&mut chunks, span, (first, spans.len() - 1));
    }
    Ok(chunks)
}

/// The whole body as a single chunk.
pub fn whole_document_chunk(doc: &KnowledgeDoc) -> Result<Chunk, IndexError> {
    doc.validate()?;
    let n = sentence_spans(&doc.body).len().max(1);
    Ok(Chunk {
        chunk_id: chunk_id(&doc.doc_id, 0),
        doc_id: doc.doc_id.clone(),
        text: doc.body.trim().into(),
        sentence_range: (0, n - 1),
    })
}
