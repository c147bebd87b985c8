//! JSON run configuration. Every section rejects unknown keys so typos fail
//! fast; omitted keys take their defaults. Relative paths are resolved
//! against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use adaptrag_core::{AnnotationConfig, FeatureSpace, PipelineConfig, PromptTemplate, TemplateKind, Templates, TrainingParams};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatewayConfig {
    pub backend: BackendKind,
    /// Chat-completion endpoint URL (http backend).
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    /// Base delay of the exponential retry backoff.
    pub backoff_ms: u64,
    pub max_concurrent_llm: usize,
    /// Ordered `{"pattern","response"}` JSONL rules (mock backend).
    pub mock_rules: Option<PathBuf>,
    pub mock_default: Option<String>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Mock,
            endpoint: String::new(),
            model: String::new(),
            api_key_env: "ADAPTRAG_API_KEY".into(),
            timeout_ms: 30_000,
            max_retries: 2,
            backoff_ms: 250,
            max_concurrent_llm: 4,
            mock_rules: None,
            mock_default: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemplatePaths {
    pub diag: Option<PathBuf>,
    pub diff: Option<PathBuf>,
    pub rag: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    /// When set, units are labeled by this HTTP service instead of a local model.
    pub remote_endpoint: Option<String>,
    pub timeout_ms: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { remote_endpoint: None, timeout_ms: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppConfig {
    pub pipeline: PipelineConfig,
    pub gateway: GatewayConfig,
    pub templates: TemplatePaths,
    pub classifier: ClassifierConfig,
    pub annotation: AnnotationConfig,
    pub features: FeatureSpace,
    pub training: TrainingParams,
    /// Record-level worker threads for batch commands.
    pub workers: usize,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            gateway: GatewayConfig::default(),
            templates: TemplatePaths::default(),
            classifier: ClassifierConfig::default(),
            annotation: AnnotationConfig::default(),
            features: FeatureSpace::default(),
            training: TrainingParams::default(),
            workers: 4,
        }
    }
}

impl AppConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: AppConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(config)
    }

    /// Defaults when no file is given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.pipeline.validate().map_err(|e| Error::Config(e.to_string()))?;
        let g = &self.gateway;
        if g.max_concurrent_llm == 0 {
            return bad("gateway.max_concurrent_llm must be at least 1".into());
        }
        if g.timeout_ms == 0 {
            return bad("gateway.timeout_ms must be positive".into());
        }
        if g.backend == BackendKind::Http && (g.endpoint.is_empty() || g.model.is_empty()) {
            return bad("gateway.endpoint and gateway.model are required for the http backend".into());
        }
        if !(0.0..=1.0).contains(&self.annotation.match_threshold) || self.annotation.m == 0 {
            return bad("annotation.match_threshold must be in [0, 1] and annotation.m positive".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(path) = p.as_mut().filter(|p| p.is_relative()) {
                *path = base.join(&*path);
            }
        };
        resolve(&mut self.gateway.mock_rules);
        resolve(&mut self.templates.diag);
        resolve(&mut self.templates.diff);
        resolve(&mut self.templates.rag);
    }

    /// Built-in templates, overridden by any configured template files.
    pub fn load_templates(&self) -> Result<Templates> {
        let load = |path: &Option<PathBuf>, kind: TemplateKind| -> Result<PromptTemplate> {
            match path {
                None => Ok(PromptTemplate::default_for(kind)),
                Some(p) => {
                    let body = fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                    PromptTemplate::new(kind, body).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
                }
            }
        };
        Ok(Templates {
            diag: load(&self.templates.diag, TemplateKind::Diag)?,
            diff: load(&self.templates.diff, TemplateKind::Diff)?,
            rag: load(&self.templates.rag, TemplateKind::Rag)?,
        })
    }
}
