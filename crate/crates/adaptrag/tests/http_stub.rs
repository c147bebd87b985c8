//! HTTP backends against an in-process stub server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use adaptrag::core::{ClassifyError, LanguageModel, LlmError, LlmRequest, Span, TextUnit, UnitClassifier, UnitLabel};
use adaptrag::{GatewayConfig, HttpBackend, RemoteClassifier};
use serde_json::{json, Value};

#[derive(Debug, Clone)]
struct Seen {
    headers: Vec<(String, String)>,
    body: Value,
}

impl Seen {
    fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

#[derive(Clone)]
enum Reply {
    Status(u16, String),
    Stall(Duration),
}

fn ok_json(body: Value) -> Reply {
    Reply::Status(200, body.to_string())
}

fn chat(text: &str) -> Reply {
    ok_json(json!({ "choices": [{ "message": { "role": "assistant", "content": text } }] }))
}

fn handle(mut stream: TcpStream, reply: Reply, log: &Mutex<Vec<Seen>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut headers = Vec::new();
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    loop {
        line.clear();
        if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
            break;
        }
        if let Some((k, v)) = line.trim_end().split_once(':') {
            headers.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    let len = headers.iter().find(|(k, _)| k.eq_ignore_ascii_case("content-length")).map_or(0, |(_, v)| v.parse().unwrap());
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    log.lock().unwrap().push(Seen { headers, body: serde_json::from_slice(&body).unwrap_or(Value::Null) });
    match reply {
        Reply::Status(code, body) => {
            let _ = write!(
                stream,
                "HTTP/1.1 {code} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
        Reply::Stall(d) => thread::sleep(d),
    }
}

/// Serves `script` in order (the last entry repeats) and records requests.
fn serve(script: Vec<Reply>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (i, stream) in listener.incoming().enumerate() {
            let Ok(stream) = stream else { return };
            let reply = script[i.min(script.len() - 1)].clone();
            let log = Arc::clone(&log);
            thread::spawn(move || handle(stream, reply, &log));
        }
    });
    (url, seen)
}

fn config(endpoint: &str) -> GatewayConfig {
    GatewayConfig {
        endpoint: endpoint.into(),
        model: "stub-model".into(),
        api_key_env: "ADAPTRAG_STUB_UNSET_KEY".into(),
        backoff_ms: 1,
        timeout_ms: 2_000,
        ..GatewayConfig::default()
    }
}

fn request() -> LlmRequest {
    LlmRequest::new("Patient record:\nfever", "diag").with_generation(0.0, 64)
}

#[test]
fn transient_errors_are_retried() {
    let (url, seen) = serve(vec![Reply::Status(503, "{}".into()), Reply::Status(503, "{}".into()), chat("Diagnosis: malaria")]);
    let backend = HttpBackend::new(&config(&url));
    let resp = backend.complete(&request()).unwrap();
    assert_eq!(resp.text, "Diagnosis: malaria");
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    assert_eq!(seen[2].body["model"], "stub-model");
    assert_eq!(seen[2].body["messages"][0]["role"], "user");
    assert_eq!(seen[2].body["messages"][0]["content"], "Patient record:\nfever");
    assert_eq!(seen[2].body["max_tokens"], 64);
    assert_eq!(seen[2].header("authorization"), None);
}

#[test]
fn retries_are_bounded() {
    let (url, seen) = serve(vec![Reply::Status(503, "{}".into())]);
    let cfg = GatewayConfig { max_retries: 3, ..config(&url) };
    let err = HttpBackend::new(&cfg).complete(&request()).unwrap_err();
    assert_eq!(err, LlmError::HttpStatus(503));
    assert_eq!(seen.lock().unwrap().len(), 4);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = serve(vec![Reply::Status(400, "{}".into())]);
    let err = HttpBackend::new(&config(&url)).complete(&request()).unwrap_err();
    assert_eq!(err, LlmError::HttpStatus(400));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn bearer_token_is_sent() {
    std::env::set_var("ADAPTRAG_STUB_KEY", "sk-test-123");
    let (url, seen) = serve(vec![chat("ok")]);
    let cfg = GatewayConfig { api_key_env: "ADAPTRAG_STUB_KEY".into(), ..config(&url) };
    let backend = HttpBackend::new(&cfg);
    backend.complete(&request()).unwrap();
    assert_eq!(seen.lock().unwrap()[0].header("authorization"), Some("Bearer sk-test-123"));
    assert!(!format!("{backend:?}").contains("sk-test-123"));
}

#[test]
fn malformed_payload_is_reported() {
    let (url, _) = serve(vec![ok_json(json!({ "choices": [] }))]);
    let err = HttpBackend::new(&config(&url)).complete(&request()).unwrap_err();
    assert!(matches!(err, LlmError::MalformedProviderPayload(_)), "{err:?}");

    let (url, _) = serve(vec![Reply::Status(200, "not json".into())]);
    let err = HttpBackend::new(&config(&url)).complete(&request()).unwrap_err();
    assert!(matches!(err, LlmError::MalformedProviderPayload(_)), "{err:?}");
}

#[test]
fn slow_provider_times_out() {
    let (url, seen) = serve(vec![Reply::Stall(Duration::from_millis(800))]);
    let cfg = GatewayConfig { timeout_ms: 100, max_retries: 1, ..config(&url) };
    let start = Instant::now();
    let err = HttpBackend::new(&cfg).complete(&request()).unwrap_err();
    assert_eq!(err, LlmError::Timeout);
    assert!(start.elapsed() < Duration::from_secs(2));
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn unreachable_endpoint_is_transport_error() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/", listener.local_addr().unwrap());
    drop(listener);
    let cfg = GatewayConfig { max_retries: 0, ..config(&url) };
    let err = HttpBackend::new(&cfg).complete(&request()).unwrap_err();
    assert!(matches!(err, LlmError::Transport(_) | LlmError::Timeout), "{err:?}");
}

fn units(texts: &[&str]) -> Vec<TextUnit> {
    texts.iter().enumerate().map(|(i, t)| TextUnit { index: i, text: t.to_string(), span: Span { start: 0, end: t.len() } }).collect()
}

#[test]
fn remote_classifier_round_trip() {
    let (url, seen) = serve(vec![ok_json(json!({ "labels": ["A", "C"], "scores": [[0.8, 0.1, 0.1], [0.1, 0.2, 0.7]] }))]);
    let classifier = RemoteClassifier::new(url, Duration::from_secs(2));
    let labeled = classifier.classify(&units(&["Hemoptysis.", "Came home."])).unwrap();
    assert_eq!(labeled.iter().map(|l| l.label).collect::<Vec<_>>(), [UnitLabel::A, UnitLabel::C]);
    assert_eq!(labeled[1].scores, [0.1, 0.2, 0.7]);
    assert_eq!(seen.lock().unwrap()[0].body, json!({ "texts": ["Hemoptysis.", "Came home."] }));
}

#[test]
fn remote_classifier_rejects_bad_replies() {
    let (url, _) = serve(vec![ok_json(json!({ "labels": ["A"], "scores": [[1.0, 0.0, 0.0]] }))]);
    let err = RemoteClassifier::new(url, Duration::from_secs(2)).classify(&units(&["a", "b"])).unwrap_err();
    assert!(matches!(err, ClassifyError::Malformed(_)), "{err:?}");

    let (url, _) = serve(vec![Reply::Status(500, "{}".into())]);
    let err = RemoteClassifier::new(url, Duration::from_secs(2)).classify(&units(&["a"])).unwrap_err();
    assert!(matches!(err, ClassifyError::Backend(_)), "{err:?}");
}
