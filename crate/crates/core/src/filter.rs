//! Differential-diagnosis filtering of reranked documents.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::gateway::{render, LanguageModel, LlmRequest, PromptTemplate};
use crate::index::KnowledgeDoc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Parsed,
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub doc_id: String,
    pub support: bool,
    pub raw_output: String,
    pub parse_status: ParseStatus,
    /// Gateway or template error, when the verdict could not be obtained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn find_word(haystack: &str, word: &str) -> Option<usize> {
    haystack.match_indices(word).map(|(at, _)| at).find(|&at| {
        let before = haystack[..at].chars().next_back();
        let after = haystack[at + word.len()..].chars().next();
        !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
    })
}

/// Case-insensitive scan for the words SUPPORT / EXCLUDE; the earliest one
/// decides. With neither present the verdict is unparseable and the document
/// is kept.
pub fn parse_verdict(text: &str) -> (bool, ParseStatus) {
    let lower = text.to_lowercase();
    match (find_word(&lower, "support"), find_word(&lower, "exclude")) {
        (Some(s), Some(e)) => (s < e, ParseStatus::Parsed),
        (Some(_), None) => (true, ParseStatus::Parsed),
        (None, Some(_)) => (false, ParseStatus::Parsed),
        (None, None) => (true, ParseStatus::Unparseable),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOutcome {
    /// Supported documents, in input order.
    pub kept: Vec<KnowledgeDoc>,
    /// One verdict per input document, in input order.
    pub verdicts: Vec<FilterVerdict>,
    pub llm_calls: usize,
}

impl FilterOutcome {
    pub fn unparseable(&self) -> usize {
        self.verdicts.iter().filter(|v| v.parse_status == ParseStatus::Unparseable).count()
    }
}

/// Asks the model for one verdict per document. Failed calls are treated as
/// unparseable (the document is kept) and the error is recorded.
pub fn filter_docs<M: LanguageModel + ?Sized>(
    record_text: &str,
    docs: &[KnowledgeDoc],
    gateway: &M,
    template: &PromptTemplate,
    generation: (f64, u32),
) -> FilterOutcome {
    let mut out = FilterOutcome { kept: Vec::new(), verdicts: Vec::with_capacity(docs.len()), llm_calls: 0 };
    for doc in docs {
        let bindings: BTreeMap<&str, &str> = [("patient", record_text), ("document", doc.body.as_str())].into();
        let reply = render(template, &bindings).map_err(|e| e.to_string()).and_then(|prompt| {
            out.llm_calls += 1;
            let request = LlmRequest::new(prompt, format!("diff:{}", doc.doc_id)).with_generation(generation.0, generation.1);
            gateway.complete(&request).map(|r| r.text).map_err(|e| e.to_string())
        });
        let verdict = match reply {
            Ok(text) => {
                let (support, parse_status) = parse_verdict(&text);
                FilterVerdict { doc_id: doc.doc_id.clone(), support, raw_output: text, parse_status, error: None }
            }
            Err(error) => FilterVerdict {
                doc_id: doc.doc_id.clone(),
                support: true,
                raw_output: String::new(),
                parse_status: ParseStatus::Unparseable,
                error: Some(error),
            },
        };
        if verdict.support {
            out.kept.push(doc.clone());
        }
        out.verdicts.push(verdict);
    }
    out
}
