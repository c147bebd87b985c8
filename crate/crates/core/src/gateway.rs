//! LLM access: prompt templates, the backend trait, and the scripted mock.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    /// Direct diagnosis from the record alone.
    Diag,
    /// Per-document SUPPORT / EXCLUDE verdict.
    Diff,
    /// Diagnosis grounded in retrieved documents.
    Rag,
}

impl TemplateKind {
    pub fn required_placeholders(self) -> &'static [&'static str] {
        match self {
            TemplateKind::Diag => &["patient"],
            TemplateKind::Diff => &["patient", "document"],
            TemplateKind::Rag => &["patient", "documents"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("missing binding for placeholder {{{0}}}")]
    MissingBinding(String),
    #[error("{kind:?} template does not declare placeholder {{{placeholder}}}")]
    MissingPlaceholder { kind: TemplateKind, placeholder: String },
}

pub const DEFAULT_DIAG_TEMPLATE: &str = "You are assisting with clinical diagnosis.\n\
Read the patient record below and give the most likely diagnosis.\n\n\
Patient record:\n{patient}\n\n\
Answer on a single line in the form \"Diagnosis: <disease>\". \
List several diseases separated by commas only if they coexist.";

pub const DEFAULT_DIFF_TEMPLATE: &str = "You are checking whether a reference document is useful for diagnosing a patient.\n\
Compare the patient's findings with the disease described in the document. \
Answer SUPPORT if the findings are consistent with that disease and the document helps the diagnosis. \
Answer EXCLUDE if the findings conflict with the document or it is irrelevant.\n\
Reply with exactly one word, SUPPORT or EXCLUDE, optionally followed by a one-sentence rationale.\n\n\
Patient record:\n{patient}\n\n\
Reference document:\n{document}";

pub const DEFAULT_RAG_TEMPLATE: &str = "You are assisting with clinical diagnosis.\n\
Use the reference documents where they apply to this patient.\n\n\
Reference documents:\n{documents}\n\n\
Patient record:\n{patient}\n\n\
Answer on a single line in the form \"Diagnosis: <disease>\". \
List several diseases separated by commas only if they coexist.";

/// Separator placed between documents in the `{documents}` binding.
pub const DOCUMENT_SEPARATOR: &str = "\n---\n";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    kind: TemplateKind,
    body: String,
}

impl PromptTemplate {
    /// Checks that `body` declares every placeholder `kind` needs.
    pub fn new(kind: TemplateKind, body: impl Into<String>) -> Result<Self, TemplateError> {
        let body = body.into();
        let declared = placeholders(&body);
        for &name in kind.required_placeholders() {
            if !declared.iter().any(|d| d == name) {
                return Err(TemplateError::MissingPlaceholder { kind, placeholder: name.into() });
            }
        }
        Ok(Self { kind, body })
    }

    pub fn default_for(kind: TemplateKind) -> Self {
        let body = match kind {
            TemplateKind::Diag => DEFAULT_DIAG_TEMPLATE,
            TemplateKind::Diff => DEFAULT_DIFF_TEMPLATE,
            TemplateKind::Rag => DEFAULT_RAG_TEMPLATE,
        };
        Self { kind, body: body.into() }
    }

    pub fn kind(&self) -> TemplateKind {
        self.kind
    }

    pub fn body(&self) -> &str {
        &self.body
    }
}

/// The three templates a pipeline run needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    pub diag: PromptTemplate,
    pub diff: PromptTemplate,
    pub rag: PromptTemplate,
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            diag: PromptTemplate::default_for(TemplateKind::Diag),
            diff: PromptTemplate::default_for(TemplateKind::Diff),
            rag: PromptTemplate::default_for(TemplateKind::Rag),
        }
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_lowercase() || c == '_'
}

/// Byte range and name of the placeholder starting at `body[at]` (a `{`).
fn placeholder_at(body: &str, at: usize) -> Option<(usize, &str)> {
    let rest = &body[at + 1..];
    let len = rest.find(|c: char| !is_name_char(c))?;
    if len > 0 && rest[len..].starts_with('}') {
        Some((at + len + 2, &rest[..len]))
    } else {
        None
    }
}

/// Names of all `{name}` placeholders in `body`, in order of appearance.
pub fn placeholders(body: &str) -> Vec<String> {
    let mut out = Vec::new();
    for (at, _) in body.match_indices('{') {
        if let Some((_, name)) = placeholder_at(body, at) {
            out.push(name.to_string());
        }
    }
    out
}

/// Substitutes every `{name}` placeholder in a single pass; bound values are
/// never rescanned.
pub fn render(template: &PromptTemplate, bindings: &BTreeMap<&str, &str>) -> Result<String, TemplateError> {
    let body = template.body.as_str();
    let mut out = String::with_capacity(body.len() + bindings.values().map(|v| v.len()).sum::<usize>());
    let mut cursor = 0;
    let mut search_from = 0;
    while let Some(rel) = body[search_from..].find('{') {
        let at = search_from + rel;
        match placeholder_at(body, at) {
            Some((end, name)) => {
                let value = bindings.get(name).ok_or_else(|| TemplateError::MissingBinding(name.into()))?;
                out.push_str(&body[cursor..at]);
                out.push_str(value);
                cursor = end;
                search_from = end;
            }
            None => search_from = at + 1,
        }
    }
    out.push_str(&body[cursor..]);
    Ok(out)
}

/// Joins document texts for the `{documents}` binding, preserving order.
pub fn join_documents<'a>(docs: impl IntoIterator<Item = &'a str>) -> String {
    docs.into_iter().collect::<Vec<_>>().join(DOCUMENT_SEPARATOR)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Trace label, e.g. `diag`, `diff:doc-7`, `annotate:mask-3`.
    pub tag: String,
}

impl LlmRequest {
    pub fn new(prompt: impl Into<String>, tag: impl Into<String>) -> Self {
        Self { prompt: prompt.into(), temperature: 0.0, max_tokens: 512, tag: tag.into() }
    }

    pub fn with_generation(mut self, temperature: f64, max_tokens: u32) -> Self {
        self.temperature = temperature;
        self.max_tokens = max_tokens;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Http,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    pub latency_ms: u64,
    pub backend: Backend,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("request timed out")]
    Timeout,
    #[error("provider returned HTTP status {0}")]
    HttpStatus(u16),
    #[error("no mock rule matched the prompt and no default response is configured")]
    NoMatchingRule,
    #[error("malformed provider payload: {0}")]
    MalformedProviderPayload(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("invalid request: {0}")]
    InvalidRequest(&'static str),
}

/// A chat-completion capable backend.
pub trait LanguageModel: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError>;
}

impl<M: LanguageModel + ?Sized> LanguageModel for &M {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (**self).complete(request)
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for alloc::boxed::Box<M> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    pub pattern: String,
    pub response: String,
}

impl MockRule {
    pub fn new(pattern: impl Into<String>, response: impl Into<String>) -> Self {
        Self { pattern: pattern.into(), response: response.into() }
    }
}

/// Scripted backend: the first rule whose pattern is a substring of the
/// prompt answers; otherwise the default response, if any.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MockBackend {
    rules: Vec<MockRule>,
    default_response: Option<String>,
}

impl MockBackend {
    pub fn new(rules: Vec<MockRule>) -> Self {
        Self { rules, default_response: None }
    }

    pub fn with_default(mut self, response: impl Into<String>) -> Self {
        self.default_response = Some(response.into());
        self
    }

    pub fn rules(&self) -> &[MockRule] {
        &self.rules
    }
}

impl LanguageModel for MockBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        if request.prompt.is_empty() {
            return Err(LlmError::InvalidRequest("empty prompt"));
        }
        let text = self
            .rules
            .iter()
            .find(|r| request.prompt.contains(r.pattern.as_str()))
            .map(|r| &r.response)
            .or(self.default_response.as_ref())
            .ok_or(LlmError::NoMatchingRule)?;
        Ok(LlmResponse { text: text.clone(), latency_ms: 0, backend: Backend::Mock })
    }
}

/// Wraps a backend and counts `complete` calls, failed ones included.
#[derive(Debug, Default)]
pub struct CountingModel<M> {
    inner: M,
    calls: AtomicUsize,
}

impl<M> CountingModel<M> {
    pub fn new(inner: M) -> Self {
        Self { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<M: LanguageModel> LanguageModel for CountingModel<M> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bind<'a>(pairs: &[(&'a str, &'a str)]) -> BTreeMap<&'a str, &'a str> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn diag_substitution() {
        let t = PromptTemplate::default_for(TemplateKind::Diag);
        let out = render(&t, &bind(&[("patient", "X")])).unwrap();
        assert!(out.contains("Patient record:\nX\n"));
        assert!(placeholders(&out).is_empty());
    }

    #[test]
    fn missing_binding_is_named() {
        let t = PromptTemplate::default_for(TemplateKind::Diff);
        assert_eq!(
            render(&t, &bind(&[("patient", "X")])),
            Err(TemplateError::MissingBinding("document".into()))
        );
    }

    #[test]
    fn rag_documents_in_order() {
        let t = PromptTemplate::new(TemplateKind::Rag, "D:{documents}|P:{patient}").unwrap();
        let docs = join_documents(["first doc", "second doc"]);
        let out = render(&t, &bind(&[("patient", "p"), ("documents", &docs)])).unwrap();
        assert_eq!(out, "D:first doc\n---\nsecond doc|P:p");
    }

    #[test]
    fn bound_values_are_not_rescanned() {
        let t = PromptTemplate::new(TemplateKind::Diag, "{patient} {x").unwrap();
        let out = render(&t, &bind(&[("patient", "{document}")])).unwrap();
        assert_eq!(out, "{document} {x");
    }

    #[test]
    fn template_must_declare_placeholders() {
        assert_eq!(
            PromptTemplate::new(TemplateKind::Diff, "only {patient}"),
            Err(TemplateError::MissingPlaceholder { kind: TemplateKind::Diff, placeholder: "document".into() })
        );
        for kind in [TemplateKind::Diag, TemplateKind::Diff, TemplateKind::Rag] {
            let t = PromptTemplate::default_for(kind);
            assert_eq!(PromptTemplate::new(kind, t.body()).unwrap(), t);
        }
    }

    #[test]
    fn mock_rules() {
        let mock = MockBackend::new(alloc::vec![MockRule::new("fever", "Diagnosis: influenza")]);
        let r = mock.complete(&LlmRequest::new("patient has fever", "t")).unwrap();
        assert_eq!(r.text, "Diagnosis: influenza");
        assert_eq!(r.backend, Backend::Mock);
        assert_eq!(mock.complete(&LlmRequest::new("cough", "t")), Err(LlmError::NoMatchingRule));
        let mock = mock.with_default("Diagnosis: unknown");
        assert_eq!(mock.complete(&LlmRequest::new("cough", "t")).unwrap().text, "Diagnosis: unknown");
    }

    #[test]
    fn first_matching_rule_wins() {
        let mock = MockBackend::new(alloc::vec![MockRule::new("a", "first"), MockRule::new("ab", "second")]);
        assert_eq!(mock.complete(&LlmRequest::new("ab", "t")).unwrap().text, "first");
    }

    #[test]
    fn counting_wrapper() {
        let m = CountingModel::new(MockBackend::default());
        let _ = m.complete(&LlmRequest::new("x", "t"));
        let _ = m.complete(&LlmRequest::new("y", "t"));
        assert_eq!(m.calls(), 2);
    }
}
