//! Chat-completion backend over blocking HTTP, plus an in-flight limiter
//! usable with any backend.

use std::fmt;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use adaptrag_core::{Backend, LanguageModel, LlmError, LlmRequest, LlmResponse};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tracing::{debug, warn};

use crate::config::GatewayConfig;

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
pub struct Limiter {
    capacity: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a>(&'a Limiter);

impl Limiter {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), in_flight: Mutex::new(0), freed: Condvar::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.capacity {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

/// Wraps a backend so at most `capacity` calls are in flight at once.
#[derive(Debug)]
pub struct Limited<M> {
    inner: M,
    limiter: Limiter,
}

impl<M> Limited<M> {
    pub fn new(inner: M, capacity: usize) -> Self {
        Self { inner, limiter: Limiter::new(capacity) }
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<M: LanguageModel> LanguageModel for Limited<M> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let _permit = self.limiter.acquire();
        self.inner.complete(request)
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: Option<String>,
}

/// OpenAI-style `/chat/completions` client with a per-attempt timeout and
/// bounded exponential-backoff retries on 408, 429, 5xx, timeouts and
/// transport errors.
pub struct HttpBackend {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    max_retries: u32,
    backoff: Duration,
}

impl fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpBackend")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("max_retries", &self.max_retries)
            .finish()
    }
}

pub(crate) fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into()
}

pub(crate) fn is_timeout(err: &ureq::Error) -> bool {
    match err {
        ureq::Error::Timeout(_) => true,
        ureq::Error::Io(e) => matches!(e.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock),
        _ => false,
    }
}

fn retryable(err: &LlmError) -> bool {
    match err {
        LlmError::HttpStatus(code) => *code == 408 || *code == 429 || *code >= 500,
        LlmError::Timeout | LlmError::Transport(_) => true,
        _ => false,
    }
}

impl HttpBackend {
    /// Reads the bearer token from `config.api_key_env`; a missing variable
    /// means unauthenticated requests.
    pub fn new(config: &GatewayConfig) -> Self {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self {
            agent: agent(Duration::from_millis(config.timeout_ms)),
            endpoint: config.endpoint.clone(),
            model: config.model.clone(),
            api_key,
            max_retries: config.max_retries,
            backoff: Duration::from_millis(config.backoff_ms),
        }
    }

    fn attempt(&self, request: &LlmRequest) -> Result<String, LlmError> {
        let body = json!({
            "model": self.model,
            "messages": [ChatMessage { role: "user", content: &request.prompt }],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| {
            if is_timeout(&e) {
                LlmError::Timeout
            } else {
                LlmError::Transport(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(LlmError::HttpStatus(status));
        }
        let parsed: ChatResponse = resp.body_mut().read_json().map_err(|e| {
            if is_timeout(&e) {
                LlmError::Timeout
            } else {
                LlmError::MalformedProviderPayload(e.to_string())
            }
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::MalformedProviderPayload("no choices[0].message.content".into()))
    }
}

impl LanguageModel for HttpBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        if request.prompt.is_empty() {
            return Err(LlmError::InvalidRequest("empty prompt"));
        }
        let start = Instant::now();
        let mut attempt = 0;
        loop {
            match self.attempt(request) {
                Ok(text) => {
                    let latency_ms = start.elapsed().as_millis() as u64;
                    debug!(tag = %request.tag, attempt, latency_ms, "completion ok");
                    return Ok(LlmResponse { text, latency_ms, backend: Backend::Http });
                }
                Err(err) if attempt < self.max_retries && retryable(&err) => {
                    let delay = self.backoff.saturating_mul(1 << attempt.min(16));
                    warn!(tag = %request.tag, attempt, error = %err, delay_ms = delay.as_millis() as u64, "retrying completion");
                    thread::sleep(delay);
                    attempt += 1;
                }
                Err(err) => return Err(err),
            }
        }
    }
}
