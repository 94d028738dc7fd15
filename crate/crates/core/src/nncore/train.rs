use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::classifier::{Classifier, Gradients};
use super::loss::Objective;
use super::tensor::Tensor;
use crate::data::{LabeledDataset, Role};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Weight of the outlier-exposure term.
    pub oe_weight: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.1, epochs: 50, batch_size: 32, oe_weight: 0.5, rng_seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if !(self.oe_weight >= 0.0 && self.oe_weight.is_finite()) {
            return Err(Error::config("oe_weight must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// Cross-entropy on the labels.
    Standard,
    /// Reverse cross-entropy on the labels; trains a deliberately wrong model.
    Reverse,
    /// Cross-entropy plus `oe_weight` times cross-entropy to uniform on outliers.
    StandardOe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-example loss seen during each epoch.
    pub loss_history: Vec<f64>,
}

/// Trains `model` on a labeled dataset.
///
/// Refuses held-out test data. `StandardOe` requires `outliers`; other kinds
/// ignore them.
pub fn train(
    model: &mut Classifier,
    data: &LabeledDataset,
    outliers: Option<&LabeledDataset>,
    cfg: &TrainConfig,
    kind: LossKind,
) -> Result<TrainReport> {
    if data.role() == Role::DefenderTest {
        return Err(Error::config(format!("refusing to train on test set '{}'", data.name())));
    }
    let objectives: Vec<Objective> = data
        .labels()
        .iter()
        .map(|&y| match kind {
            LossKind::Reverse => Objective::Reverse(y),
            _ => Objective::Label(y),
        })
        .collect();
    let outliers = match (kind, outliers) {
        (LossKind::StandardOe, None) => return Err(Error::config("standard+oe training needs an outlier set")),
        (LossKind::StandardOe, Some(o)) => {
            if o.role() == Role::DefenderTest {
                return Err(Error::config("refusing to use the test set as outliers"));
            }
            if o.is_empty() {
                return Err(Error::config("outlier set is empty"));
            }
            Some(o.inputs())
        }
        _ => None,
    };
    fit(model, data.inputs(), &objectives, outliers, cfg)
}

/// Minibatch SGD over arbitrary per-example objectives.
///
/// Each epoch shuffles the examples with the seeded generator. When
/// `outliers` is given and `oe_weight > 0`, every batch is paired with an
/// equally sized batch of outliers drawn from an independent stream.
pub fn fit(
    model: &mut Classifier,
    inputs: &[Tensor],
    objectives: &[Objective],
    outliers: Option<&[Tensor]>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(Error::config("cannot train on an empty dataset"));
    }
    if inputs.len() != objectives.len() {
        return Err(Error::dim("inputs and objectives differ in length"));
    }
    for x in inputs.iter().chain(outliers.unwrap_or(&[])) {
        if x.shape() != model.input_shape() {
            return Err(Error::dim(format!("model expects input {:?}, got {:?}", model.input_shape(), x.shape())));
        }
    }
    for obj in objectives {
        obj.validate(model.num_classes())?;
    }
    let outliers = outliers.filter(|_| cfg.oe_weight > 0.0);

    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut shuffle_rng = rng(cfg.rng_seed);
    let mut outlier_draw = outliers.map(|o| OutlierCycle::new(o.len(), derive_seed(cfg.rng_seed, "outliers")));
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = model.zero_grads();
            for &i in batch {
                epoch_loss += accumulate(model, &inputs[i], &objectives[i], &mut grads);
            }
            if let (Some(pool), Some(draw)) = (outliers, outlier_draw.as_mut()) {
                let mut ograds = model.zero_grads();
                let mut oloss = 0.0;
                for _ in 0..batch.len() {
                    oloss += accumulate(model, &pool[draw.next()], &Objective::Uniform, &mut ograds);
                }
                grads.add_scaled(&ograds, cfg.oe_weight);
                epoch_loss += cfg.oe_weight * oloss;
            }
            model.sgd_step(&grads, cfg.learning_rate / batch.len() as f64);
        }
        let mean = epoch_loss / inputs.len() as f64;
        if !mean.is_finite() || !model.params_are_finite() {
            return Err(Error::Diverged(format!("non-finite loss at epoch {epoch}")));
        }
        history.push(mean);
    }
    Ok(TrainReport { loss_history: history })
}

fn accumulate(model: &Classifier, x: &Tensor, objective: &Objective, grads: &mut Gradients) -> f64 {
    let trace = model.trace(x.data());
    model.backward(&trace, &objective.logit_grad(&trace.probs), grads);
    objective.loss(&trace.probs)
}

// Walks the outlier pool in shuffled passes.
struct OutlierCycle {
    order: Vec<usize>,
    cursor: usize,
    rng: crate::rng::Rng,
}

impl OutlierCycle {
    fn new(n: usize, seed: u64) -> Self {
        let mut rng = rng(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        OutlierCycle { order, cursor: 0, rng }
    }

    fn next(&mut self) -> usize {
        if self.cursor == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.order[self.cursor - 1]
    }
}
