//! Information completeness of a labeled record and the retrieval routing
//! decision derived from it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::UnitLabel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompletenessError {
    #[error("no labels to score")]
    EmptyLabels,
    #[error("invalid completeness weights: need alpha > 0 and alpha >= beta >= gamma >= 0")]
    InvalidWeights,
    #[error("invalid routing thresholds: need 0 <= theta2 < theta1 <= 1")]
    InvalidThresholds,
}

/// Per-label weights for A, B and C units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletenessWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for CompletenessWeights {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 0.5, gamma: 0.0 }
    }
}

impl CompletenessWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self, CompletenessError> {
        let w = Self { alpha, beta, gamma };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), CompletenessError> {
        let ok = self.alpha > 0.0 && self.alpha >= self.beta && self.beta >= self.gamma && self.gamma >= 0.0;
        if ok && self.alpha.is_finite() {
            Ok(())
        } else {
            Err(CompletenessError::InvalidWeights)
        }
    }

    pub fn weight(&self, label: UnitLabel) -> f64 {
        match label {
            UnitLabel::A => self.alpha,
            UnitLabel::B => self.beta,
            UnitLabel::C => self.gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingThresholds {
    /// Above this, the record goes straight to diagnosis.
    pub theta1: f64,
    /// Below this, retrieval runs with a warning attached.
    pub theta2: f64,
}

impl Default for RoutingThresholds {
    fn default() -> Self {
        Self { theta1: 0.6, theta2: 0.2 }
    }
}

impl RoutingThresholds {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self, CompletenessError> {
        let t = Self { theta1, theta2 };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), CompletenessError> {
        if 0.0 <= self.theta2 && self.theta2 < self.theta1 && self.theta1 <= 1.0 {
            Ok(())
        } else {
            Err(CompletenessError::InvalidThresholds)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingDecision {
    Direct,
    Retrieve,
    RetrieveWithWarning,
}

impl RoutingDecision {
    pub fn retrieves(self) -> bool {
        !matches!(self, RoutingDecision::Direct)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RoutingDecision::Direct => "direct",
            RoutingDecision::Retrieve => "retrieve",
            RoutingDecision::RetrieveWithWarning => "retrieve_with_warning",
        }
    }
}

/// Label counts for (A, B, C).
pub fn label_counts(labels: &[UnitLabel]) -> [usize; 3] {
    let mut counts = [0; 3];
    for l in labels {
        counts[l.index()] += 1;
    }
    counts
}

/// `(alpha*n_A + beta*n_B + gamma*n_C) / (alpha*n)`, in `[gamma/alpha, 1]`.
pub fn compute_completeness(labels: &[UnitLabel], weights: &CompletenessWeights) -> Result<f64, CompletenessError> {
    weights.validate()?;
    if labels.is_empty() {
        return Err(CompletenessError::EmptyLabels);
    }
    Ok(completeness_from_counts(label_counts(labels), weights))
}

fn completeness_from_counts(counts: [usize; 3], w: &CompletenessWeights) -> f64 {
    let [a, b, c] = counts.map(|n| n as f64);
    let n = a + b + c;
    (w.alpha * a + w.beta * b + w.gamma * c) / (w.alpha * n)
}

/// Strictly above `theta1` is direct; `[theta2, theta1]` retrieves; strictly
/// below `theta2` retrieves with a warning.
pub fn route(i_norm: f64, thresholds: &RoutingThresholds) -> RoutingDecision {
    if i_norm > thresholds.theta1 {
        RoutingDecision::Direct
    } else if i_norm >= thresholds.theta2 {
        RoutingDecision::Retrieve
    } else {
        RoutingDecision::RetrieveWithWarning
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletenessReport {
    pub counts: [usize; 3],
    pub n: usize,
    pub i_norm: f64,
    pub decision: RoutingDecision,
}

impl CompletenessReport {
    pub fn assess(
        labels: &[UnitLabel],
        weights: &CompletenessWeights,
        thresholds: &RoutingThresholds,
    ) -> Result<Self, CompletenessError> {
        thresholds.validate()?;
        let i_norm = compute_completeness(labels, weights)?;
        Ok(Self { counts: label_counts(labels), n: labels.len(), i_norm, decision: route(i_norm, thresholds) })
    }
}
