//! Mini-batch gradient descent for the logistic regression model.
//!
//! Objective: mean cross-entropy plus `l2 / 2 * ||W||^2` (biases are not
//! regularized).

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{featurize, softmax, ClassifierModel, FeatureSpace, ModelMetadata, SparseVector, TrainingExample, UnitLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingParams {
    pub l2: f64,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for TrainingParams {
    fn default() -> Self {
        Self { l2: 1e-4, epochs: 20, lr: 0.1, seed: 0, batch_size: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("training corpus needs at least two distinct labels, found {0}")]
    DegenerateCorpus(usize),
    #[error("training example {0} has empty text")]
    EmptyText(usize),
    #[error("invalid training parameters: {0}")]
    InvalidParams(&'static str),
}

/// Featurized example.
pub type Sample = (SparseVector, UnitLabel);

/// Dense gradient of the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: [Vec<f64>; 3],
    pub bias: [f64; 3],
}

pub fn featurize_all(examples: &[TrainingExample], space: &FeatureSpace) -> Vec<Sample> {
    examples.iter().map(|e| (featurize(&e.text, space), e.label)).collect()
}

/// Objective value over `samples`.
pub fn loss(model: &ClassifierModel, samples: &[Sample], l2: f64) -> f64 {
    let data: f64 = samples
        .iter()
        .map(|(x, y)| -libm::log(model.probabilities(x)[y.index()]))
        .sum::<f64>()
        / samples.len() as f64;
    let reg: f64 = model.weights.iter().flatten().map(|w| w * w).sum();
    data + 0.5 * l2 * reg
}

/// Analytic gradient of [`loss`].
pub fn gradient(model: &ClassifierModel, samples: &[Sample], l2: f64) -> Gradient {
    let mut grad = Gradient {
        weights: model.weights.clone().map(|w| w.into_iter().map(|v| l2 * v).collect()),
        bias: [0.0; 3],
    };
    let scale = 1.0 / samples.len() as f64;
    for (x, y) in samples {
        let p = model.probabilities(x);
        for c in 0..3 {
            let err = (p[c] - f64::from(u8::from(c == y.index()))) * scale;
            grad.bias[c] += err;
            for &(i, v) in &x.entries {
                grad.weights[c][i as usize] += err * v;
            }
        }
    }
    grad
}

/// One full-batch descent step.
pub fn gradient_step(model: &mut ClassifierModel, samples: &[Sample], l2: f64, lr: f64) {
    let grad = gradient(model, samples, l2);
    for c in 0..3 {
        for (w, g) in model.weights[c].iter_mut().zip(&grad.weights[c]) {
            *w -= lr * g;
        }
        model.bias[c] -= lr * grad.bias[c];
    }
}

/// Weights held as `scale * raw` so the L2 shrink of every mini-batch is a
/// single multiply; each step then touches only active features.
struct ScaledWeights {
    raw: [Vec<f64>; 3],
    scale: f64,
}

impl ScaledWeights {
    /// Below this the raw values are folded back to keep them well scaled.
    const MIN_SCALE: f64 = 1e-6;

    fn probabilities(&self, x: &SparseVector, bias: &[f64; 3]) -> [f64; 3] {
        softmax([0, 1, 2].map(|c| self.scale * x.dot(&self.raw[c]) + bias[c]))
    }

    fn fold(&mut self) {
        let scale = self.scale;
        self.raw.iter_mut().flatten().for_each(|w| *w *= scale);
        self.scale = 1.0;
    }
}

fn minibatch_step(weights: &mut ScaledWeights, bias: &mut [f64; 3], batch: &[&Sample], l2: f64, lr: f64) {
    let n = batch.len() as f64;
    let mut updates: Vec<(usize, u32, f64)> = Vec::new();
    let mut bias_grad = [0.0; 3];
    for (x, y) in batch {
        let p = weights.probabilities(x, bias);
        for c in 0..3 {
            let err = (p[c] - f64::from(u8::from(c == y.index()))) / n;
            bias_grad[c] += err;
            updates.extend(x.entries.iter().map(|&(i, v)| (c, i, err * v)));
        }
    }
    if l2 > 0.0 {
        weights.scale *= 1.0 - lr * l2;
        if weights.scale < ScaledWeights::MIN_SCALE {
            weights.fold();
        }
    }
    let step = lr / weights.scale;
    for (c, i, g) in updates {
        weights.raw[c][i as usize] -= step * g;
    }
    for c in 0..3 {
        bias[c] -= lr * bias_grad[c];
    }
}

pub fn accuracy(model: &ClassifierModel, samples: &[Sample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let correct = samples
        .iter()
        .filter(|(x, y)| UnitLabel::argmax(&model.probabilities(x)) == *y)
        .count();
    correct as f64 / samples.len() as f64
}

/// Fits a model; deterministic for a given `params.seed`.
pub fn train(
    examples: &[TrainingExample],
    space: &FeatureSpace,
    params: &TrainingParams,
) -> Result<ClassifierModel, TrainError> {
    if !(params.lr > 0.0) || !(params.l2 >= 0.0) {
        return Err(TrainError::InvalidParams("lr must be > 0 and l2 >= 0"));
    }
    if params.batch_size == 0 {
        return Err(TrainError::InvalidParams("batch_size must be positive"));
    }
    if let Some(i) = examples.iter().position(|e| e.text.trim().is_empty()) {
        return Err(TrainError::EmptyText(i));
    }
    let mut class_counts = [0usize; 3];
    for e in examples {
        class_counts[e.label.index()] += 1;
    }
    let distinct = class_counts.iter().filter(|&&n| n > 0).count();
    if distinct < 2 {
        return Err(TrainError::DegenerateCorpus(distinct));
    }

    let mut model = ClassifierModel::zeros(space.clone());
    model
        .validate()
        .map_err(|_| TrainError::InvalidParams("feature space must have dimension >= 1024 and a valid order range"))?;

    let samples = featurize_all(examples, space);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut batch = Vec::with_capacity(params.batch_size);
    let mut weights = ScaledWeights { raw: core::mem::take(&mut model.weights), scale: 1.0 };
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(params.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| &samples[i]));
            minibatch_step(&mut weights, &mut model.bias, &batch, params.l2, params.lr);
        }
    }
    weights.fold();
    model.weights = weights.raw;

    model.metadata = ModelMetadata {
        params: params.clone(),
        n_examples: examples.len(),
        class_counts,
        train_accuracy: accuracy(&model, &samples),
    };
    Ok(model)
}
