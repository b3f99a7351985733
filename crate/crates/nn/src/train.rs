//! Mini-batch training loop.
//!
//! Batches are drawn from a seeded shuffle, but gradients inside a batch
//! are always summed in ascending example order and every example's
//! dropout masks come from an rng keyed by `(seed, epoch, example)`. The
//! result is a pure function of the seed, and with a full-set batch it is
//! independent of the shuffle altogether.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::layers::ForwardCtx;
use crate::loss::{cross_entropy, softmax_cross_entropy_grad};
use crate::model::Model;
use crate::optim::{Adam, AdamConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Rescale each batch gradient to at most this global L2 norm; `0`
    /// disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 12,
            learning_rate: 3e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(NnError::InvalidTrainConfig(
                "batch_size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(NnError::InvalidTrainConfig(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || self.epsilon <= 0.0
        {
            return Err(NnError::InvalidTrainConfig(
                "adam betas must lie in [0, 1) and epsilon be positive".into(),
            ));
        }
        if !(self.clip_norm >= 0.0) || !self.clip_norm.is_finite() {
            return Err(NnError::InvalidTrainConfig(format!(
                "clip_norm {} must be finite and non-negative",
                self.clip_norm
            )));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn dropout_seed(seed: u64, epoch: usize, example: usize) -> u64 {
    mix(mix(mix(seed) ^ epoch as u64) ^ example as u64)
}

/// Stateful trainer; one [`Trainer::run_epoch`] per pass over the data.
pub struct Trainer<'m> {
    model: &'m mut Model,
    cfg: TrainConfig,
    adam: Adam,
    order_rng: ChaCha8Rng,
    epoch: usize,
}

impl<'m> Trainer<'m> {
    pub fn new(model: &'m mut Model, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let adam = Adam::new(cfg.adam(), &model.param_sizes());
        let order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Self {
            model,
            cfg,
            adam,
            order_rng,
            epoch: 0,
        })
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    pub fn run_epoch(&mut self, inputs: &[&[f64]], labels: &[usize]) -> Result<EpochStats> {
        if inputs.len() != labels.len() {
            return Err(NnError::ShapeMismatch {
                layer: "train",
                dim: "labels",
                expected: inputs.len(),
                found: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.model.config().n_classes) {
            return Err(NnError::InvalidTrainConfig(format!(
                "label {bad} out of range"
            )));
        }
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        order.shuffle(&mut self.order_rng);
        let mut total_loss = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(self.cfg.batch_size) {
            let mut batch = chunk.to_vec();
            batch.sort_unstable();
            let mut grads = self.model.zero_grads();
            for &i in &batch {
                let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed(self.cfg.seed, self.epoch, i));
                let mut ctx = ForwardCtx {
                    training: true,
                    rng: Some(&mut rng),
                };
                let trace = self.model.forward_train(inputs[i], &mut ctx)?;
                total_loss += cross_entropy(&trace.logits, labels[i]);
                if argmax(&trace.logits) == labels[i] {
                    correct += 1;
                }
                let g = softmax_cross_entropy_grad(&trace.logits, labels[i]);
                self.model.backward(&trace, &g, &mut grads)?;
            }
            let mut scale = 1.0 / batch.len() as f64;
            if self.cfg.clip_norm > 0.0 {
                let norm = scale * grads.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
                if norm > self.cfg.clip_norm {
                    scale *= self.cfg.clip_norm / norm;
                }
            }
            for g in &mut grads {
                g.iter_mut().for_each(|v| *v *= scale);
            }
            self.adam.update(self.model.params_mut(), &grads);
        }
        let n = inputs.len().max(1) as f64;
        let stats = EpochStats {
            epoch: self.epoch,
            loss: total_loss / n,
            accuracy: correct as f64 / n,
        };
        if !stats.loss.is_finite() {
            return Err(NnError::Divergence {
                epoch: self.epoch,
                loss: stats.loss,
            });
        }
        self.epoch += 1;
        Ok(stats)
    }
}

/// Trains for `cfg.epochs` passes and returns the per-epoch history.
pub fn train(
    model: &mut Model,
    inputs: &[&[f64]],
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<History> {
    let mut trainer = Trainer::new(model, cfg.clone())?;
    let mut history = History::default();
    for _ in 0..cfg.epochs {
        history.epochs.push(trainer.run_epoch(inputs, labels)?);
    }
    Ok(history)
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Fraction of windows whose most probable class equals the label.
pub fn accuracy(model: &Model, inputs: &[&[f64]], labels: &[usize]) -> Result<f64> {
    let mut correct = 0;
    for (x, &y) in inputs.iter().zip(labels) {
        if argmax(&model.logits(x)?) == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / inputs.len().max(1) as f64)
}
