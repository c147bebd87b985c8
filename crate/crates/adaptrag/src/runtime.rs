//! Assembles backends and models from configuration.

use std::path::Path;
use std::time::Duration;

use adaptrag_core::{LanguageModel, MockBackend, UnitClassifier};
use tracing::warn;

use crate::config::{AppConfig, BackendKind, GatewayConfig};
use crate::error::{Error, Result};
use crate::formats::load_mock_rules;
use crate::http::{HttpBackend, Limited};
use crate::persist::load_model;
use crate::remote::RemoteClassifier;

/// The configured language-model backend behind the in-flight limit.
pub fn build_gateway(config: &GatewayConfig) -> Result<Box<dyn LanguageModel>> {
    let cap = config.max_concurrent_llm;
    Ok(match config.backend {
        BackendKind::Mock => {
            let rules = config.mock_rules.as_deref().map(load_mock_rules).transpose()?.unwrap_or_default();
            if rules.is_empty() && config.mock_default.is_none() {
                warn!("mock backend has no rules and no default response; every call will fail");
            }
            let mut mock = MockBackend::new(rules);
            if let Some(default) = &config.mock_default {
                mock = mock.with_default(default.clone());
            }
            Box::new(Limited::new(mock, cap))
        }
        BackendKind::Http => Box::new(Limited::new(HttpBackend::new(config), cap)),
    })
}

/// A remote classifier when one is configured, otherwise the model file.
pub fn build_classifier(config: &AppConfig, model: Option<&Path>) -> Result<Box<dyn UnitClassifier>> {
    match (&config.classifier.remote_endpoint, model) {
        (Some(endpoint), _) => Ok(Box::new(RemoteClassifier::new(endpoint.clone(), Duration::from_millis(config.classifier.timeout_ms)))),
        (None, Some(path)) => Ok(Box::new(load_model(path)?)),
        (None, None) => Err(Error::Config("a --model file or classifier.remote_endpoint is required".into())),
    }
}
