//! Sentence importance classification into labels A / B / C.
//!
//! The bundled model is multinomial logistic regression over hashed char
//! n-grams. Other backends plug in through [`UnitClassifier`].

mod features;
pub mod train;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segment::TextUnit;

pub use features::{bucket, featurize, FeatureSpace, SparseVector};
pub use train::{train, TrainError, TrainingParams};

/// Importance of a text unit for diagnosis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UnitLabel {
    /// Critical to the diagnostic decision.
    A,
    /// Helps retrieval without settling the diagnosis on its own.
    B,
    /// Unimportant.
    C,
}

impl UnitLabel {
    pub const ALL: [UnitLabel; 3] = [UnitLabel::A, UnitLabel::B, UnitLabel::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            UnitLabel::A => "A",
            UnitLabel::B => "B",
            UnitLabel::C => "C",
        }
    }

    /// Argmax of a score triple; ties go to the earlier label (A > B > C).
    pub fn argmax(scores: &[f64; 3]) -> Self {
        let mut best = 0;
        for i in 1..3 {
            if scores[i] > scores[best] {
                best = i;
            }
        }
        Self::ALL[best]
    }
}

impl fmt::Display for UnitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for UnitLabel {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(UnitLabel::A),
            "B" => Ok(UnitLabel::B),
            "C" => Ok(UnitLabel::C),
            other => Err(ClassifyError::Malformed(alloc::format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledUnit {
    pub unit: TextUnit,
    pub label: UnitLabel,
    /// Probabilities for (A, B, C).
    pub scores: [f64; 3],
}

impl LabeledUnit {
    pub fn from_scores(unit: TextUnit, scores: [f64; 3]) -> Self {
        Self { unit, label: UnitLabel::argmax(&scores), scores }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub text: String,
    pub label: UnitLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifyError {
    #[error("classifier backend failed: {0}")]
    Backend(String),
    #[error("malformed classifier output: {0}")]
    Malformed(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// Anything that labels a record's units, in input order.
pub trait UnitClassifier: Send + Sync {
    fn classify(&self, units: &[TextUnit]) -> Result<Vec<LabeledUnit>, ClassifyError>;
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub params: TrainingParams,
    pub n_examples: usize,
    /// Example counts for (A, B, C).
    pub class_counts: [usize; 3],
    pub train_accuracy: f64,
}

/// Trained multinomial logistic regression model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub feature_space: FeatureSpace,
    /// One dense weight vector per class, each `feature_space.dimension` long.
    pub weights: [Vec<f64>; 3],
    pub bias: [f64; 3],
    pub metadata: ModelMetadata,
}

impl ClassifierModel {
    pub const MIN_DIMENSION: usize = 1 << 10;

    /// All-zero model; predicts the uniform distribution.
    pub fn zeros(feature_space: FeatureSpace) -> Self {
        let dim = feature_space.dimension;
        Self {
            feature_space,
            weights: [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]],
            bias: [0.0; 3],
            metadata: ModelMetadata::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ClassifyError> {
        let dim = self.feature_space.dimension;
        if dim < Self::MIN_DIMENSION {
            return Err(ClassifyError::InvalidModel(alloc::format!(
                "hash dimension {dim} is below {}",
                Self::MIN_DIMENSION
            )));
        }
        if self.weights.iter().any(|w| w.len() != dim) {
            return Err(ClassifyError::InvalidModel("weight length differs from dimension".into()));
        }
        if self.feature_space.min_order == 0 || self.feature_space.min_order > self.feature_space.max_order {
            return Err(ClassifyError::InvalidModel("bad n-gram order range".into()));
        }
        Ok(())
    }

    /// Class probabilities for an already featurized vector.
    pub fn probabilities(&self, x: &SparseVector) -> [f64; 3] {
        let logits = [0, 1, 2].map(|c| x.dot(&self.weights[c]) + self.bias[c]);
        softmax(logits)
    }

    pub fn scores(&self, text: &str) -> [f64; 3] {
        self.probabilities(&featurize(text, &self.feature_space))
    }
}

pub(crate) fn softmax(logits: [f64; 3]) -> [f64; 3] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = logits.map(|z| libm::exp(z - max));
    let total: f64 = exps.iter().sum();
    exps.map(|e| e / total)
}

pub fn predict(model: &ClassifierModel, unit: &TextUnit) -> LabeledUnit {
    LabeledUnit::from_scores(unit.clone(), model.scores(&unit.text))
}

pub fn predict_batch(model: &ClassifierModel, units: &[TextUnit]) -> Vec<LabeledUnit> {
    units.iter().map(|u| predict(model, u)).collect()
}

impl UnitClassifier for ClassifierModel {
    fn classify(&self, units: &[TextUnit]) -> Result<Vec<LabeledUnit>, ClassifyError> {
        Ok(predict_batch(self, units))
    }
}
