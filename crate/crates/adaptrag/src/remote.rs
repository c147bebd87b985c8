//! Unit classification delegated to an HTTP service.
//!
//! Request `{"texts": [..]}`, response `{"labels": ["A"|"B"|"C", ..],
//! "scores": [[a, b, c], ..]}` with one entry per text.

use std::time::Duration;

use adaptrag_core::{ClassifyError, LabeledUnit, TextUnit, UnitClassifier, UnitLabel};
use serde::Deserialize;
use serde_json::json;

use crate::http::{agent, is_timeout};

#[derive(Deserialize)]
struct RemoteReply {
    labels: Vec<String>,
    scores: Vec<[f64; 3]>,
}

pub struct RemoteClassifier {
    agent: ureq::Agent,
    endpoint: String,
}

impl RemoteClassifier {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self { agent: agent(timeout), endpoint: endpoint.into() }
    }
}

fn decode(reply: RemoteReply, units: &[TextUnit]) -> Result<Vec<LabeledUnit>, ClassifyError> {
    if reply.labels.len() != units.len() || reply.scores.len() != units.len() {
        return Err(ClassifyError::Malformed(format!(
            "{} labels and {} score rows for {} texts",
            reply.labels.len(),
            reply.scores.len(),
            units.len()
        )));
    }
    units
        .iter()
        .zip(reply.labels.iter().zip(reply.scores))
        .map(|(unit, (label, scores))| {
            let label: UnitLabel = label.parse()?;
            if scores.iter().any(|s| !s.is_finite()) {
                return Err(ClassifyError::Malformed("non-finite score".into()));
            }
            Ok(LabeledUnit { unit: unit.clone(), label, scores })
        })
        .collect()
}

impl UnitClassifier for RemoteClassifier {
    fn classify(&self, units: &[TextUnit]) -> Result<Vec<LabeledUnit>, ClassifyError> {
        let texts: Vec<&str> = units.iter().map(|u| u.text.as_str()).collect();
        let mut resp = self.agent.post(&self.endpoint).send_json(json!({ "texts": texts })).map_err(|e| {
            if is_timeout(&e) {
                ClassifyError::Backend("classifier request timed out".into())
            } else {
                ClassifyError::Backend(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(ClassifyError::Backend(format!("classifier returned HTTP status {status}")));
        }
        let reply: RemoteReply = resp.body_mut().read_json().map_err(|e| ClassifyError::Malformed(e.to_string()))?;
        decode(reply, units)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use adaptrag_core::Span;

    fn units(n: usize) -> Vec<TextUnit> {
        (0..n).map(|i| TextUnit { index: i, text: format!("u{i}"), span: Span { start: i, end: i + 1 } }).collect()
    }

    #[test]
    fn decodes_aligned_reply() {
        let reply = RemoteReply { labels: vec!["A".into(), "C".into()], scores: vec![[0.8, 0.1, 0.1], [0.1, 0.1, 0.8]] };
        let out = decode(reply, &units(2)).unwrap();
        assert_eq!(out[0].label, UnitLabel::A);
        assert_eq!(out[1].label, UnitLabel::C);
    }

    #[test]
    fn rejects_misaligned_or_unknown() {
        let reply = RemoteReply { labels: vec!["A".into()], scores: vec![[1.0, 0.0, 0.0]] };
        assert!(matches!(decode(reply, &units(2)), Err(ClassifyError::Malformed(_))));
        let reply = RemoteReply { labels: vec!["Z".into()], scores: vec![[1.0, 0.0, 0.0]] };
        assert!(decode(reply, &units(1)).is_err());
    }
}
