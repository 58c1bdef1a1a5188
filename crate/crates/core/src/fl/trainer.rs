//! Local mini-batch gradient descent on synthetic convex tasks.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use thiserror::Error;

use crate::model::ModelVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("empty training shard")]
    EmptyShard,
    #[error("model has {model} parameters, objective expects {expected}")]
    DimensionMismatch { model: usize, expected: usize },
    #[error("training diverged at iteration {iteration}: loss {loss}")]
    Diverged { iteration: usize, loss: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Task {
    #[default]
    SyntheticRegression,
    SyntheticClassification,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::SyntheticRegression => "synthetic_regression",
            Task::SyntheticClassification => "synthetic_classification",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "synthetic_regression" => Ok(Task::SyntheticRegression),
            "synthetic_classification" => Ok(Task::SyntheticClassification),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub local_iterations: usize,
    pub task: Task,
}

/// A differentiable empirical loss over indexed samples.
pub trait Objective {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of model parameters.
    fn dim(&self) -> usize;

    /// Mean loss over `batch`; writes the mean gradient into `grad`.
    fn loss_grad(&self, model: &[f64], batch: &[usize], grad: &mut [f64]) -> f64;

    fn loss(&self, model: &[f64]) -> f64 {
        let all: Vec<usize> = (0..self.len()).collect();
        let mut scratch = vec![0.0; self.dim()];
        self.loss_grad(model, &all, &mut scratch)
    }
}

/// One satellite's local data: `features` row-major, one bias term appended
/// to the model after the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Shard {
    task: Task,
    features: Vec<f64>,
    targets: Vec<f64>,
    feature_dim: usize,
}

impl Shard {
    pub fn new(task: Task, feature_dim: usize, features: Vec<f64>, targets: Vec<f64>) -> Self {
        assert_eq!(features.len(), feature_dim * targets.len());
        Self {
            task,
            features,
            targets,
            feature_dim,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Objective for Shard {
    fn len(&self) -> usize {
        self.targets.len()
    }

    fn dim(&self) -> usize {
        self.feature_dim + 1
    }

    fn loss_grad(&self, model: &[f64], batch: &[usize], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let d = self.feature_dim;
        let (w, b) = (&model[..d], model[d]);
        let mut total = 0.0;
        for &i in batch {
            let x = self.row(i);
            let y = self.targets[i];
            let z: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b;
            let (loss, residual) = match self.task {
                Task::SyntheticRegression => (0.5 * (z - y) * (z - y), z - y),
                Task::SyntheticClassification => (softplus(z) - y * z, sigmoid(z) - y),
            };
            total += loss;
            for (g, xj) in grad[..d].iter_mut().zip(x) {
                *g += residual * xj;
            }
            grad[d] += residual;
        }
        let n = batch.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        total / n
    }
}

/// Shared ground truth from which every shard is sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub task: Task,
    pub feature_dim: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl SyntheticTask {
    pub fn new(task: Task, feature_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let u = Uniform::new_inclusive(-1.0, 1.0);
        let weights = (0..feature_dim).map(|_| u.sample(&mut rng)).collect();
        Self {
            task,
            feature_dim,
            weights,
            bias: 0.25,
        }
    }

    pub fn model_len(&self) -> usize {
        self.feature_dim + 1
    }

    /// Draws `size` i.i.d. samples; regression targets carry N(0, 0.1^2)
    /// noise and class labels are thresholded with N(0, 1) noise.
    pub fn shard(&self, size: usize, seed: u64) -> Shard {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut features = Vec::with_capacity(size * self.feature_dim);
        let mut targets = Vec::with_capacity(size);
        for _ in 0..size {
            let start = features.len();
            features.extend((0..self.feature_dim).map(|_| -> f64 { StandardNormal.sample(&mut rng) }));
            let z: f64 = self
                .weights
                .iter()
                .zip(&features[start..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                + self.bias;
            let noise: f64 = StandardNormal.sample(&mut rng);
            targets.push(match self.task {
                Task::SyntheticRegression => z + 0.1 * noise,
                Task::SyntheticClassification => f64::from(z + noise > 0.0),
            });
        }
        Shard::new(self.task, self.feature_dim, features, targets)
    }
}

/// Runs `local_iterations` mini-batch steps `w <- w - lr * grad` and returns
/// the trained model with its loss over the whole objective.
pub fn local_train<O: Objective + ?Sized>(
    model: &ModelVector,
    objective: &O,
    config: &TrainerConfig,
    seed: u64,
) -> Result<(ModelVector, f64), TrainError> {
    let n = objective.len();
    if n == 0 {
        return Err(TrainError::EmptyShard);
    }
    if model.len() != objective.dim() {
        return Err(TrainError::DimensionMismatch {
            model: model.len(),
            expected: objective.dim(),
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut w = model.values().to_vec();
    let mut grad = vec![0.0; w.len()];
    let batch_size = config.batch_size.clamp(1, n);
    let full: Vec<usize> = (0..n).collect();
    for iteration in 0..config.local_iterations {
        let batch = if batch_size == n {
            full.clone()
        } else {
            let mut b = index::sample(&mut rng, n, batch_size).into_vec();
            b.sort_unstable();
            b
        };
        let loss = objective.loss_grad(&w, &batch, &mut grad);
        if !loss.is_finite() {
            return Err(TrainError::Diverged { iteration, loss });
        }
        for (wi, gi) in w.iter_mut().zip(&grad) {
            *wi -= config.learning_rate * gi;
        }
    }
    let loss = objective.loss(&w);
    if !loss.is_finite() || w.iter().any(|v| !v.is_finite()) {
        return Err(TrainError::Diverged {
            iteration: config.local_iterations,
            loss,
        });
    }
    Ok((ModelVector::new(w), loss))
}
