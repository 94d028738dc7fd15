//! Extraction attacks. Everything here talks to the victim only through
//! [`PredictionApi`]; no attack can see the defender's parameters.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetFile, LabeledDataset, Role};
use crate::defense::{PredictionApi, UserId};
use crate::error::{Error, Result};
use crate::nncore::{fit, Classifier, LayerSpec, Objective, Tensor, TrainConfig};
use crate::prob::argmax;
use crate::rng::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    Knockoff,
    Jbda,
}

impl AttackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::Knockoff => "knockoff",
            AttackKind::Jbda => "jbda",
        }
    }
}

/// How the clone consumes the served probability vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelStrategy {
    /// Distill the full vectors.
    Soft,
    /// Train on their argmax as a hard label.
    Argmax,
}

impl LabelStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelStrategy::Soft => "soft",
            LabelStrategy::Argmax => "argmax",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackConfig {
    pub kind: AttackKind,
    /// Knockoff: number of surrogate queries.
    pub query_budget: usize,
    /// Knockoff: name of the surrogate source.
    pub surrogate: String,
    /// JBDA: number of in-distribution seed examples.
    pub seed_size: usize,
    /// JBDA: augmentation rounds.
    pub rounds: usize,
    /// JBDA: sign-gradient step.
    pub jbda_step: f64,
    pub clone_epochs_per_round: usize,
    pub label_strategy: LabelStrategy,
    pub rng_seed: u64,
    /// JBDA: hard cap on victim queries; the attack stops early when reached.
    pub query_cap: Option<usize>,
    /// JBDA: reinitialize the clone before each round's training.
    pub restart_each_round: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            kind: AttackKind::Knockoff,
            query_budget: 500,
            surrogate: "shifted".into(),
            seed_size: 20,
            rounds: 4,
            jbda_step: 0.1,
            clone_epochs_per_round: 30,
            label_strategy: LabelStrategy::Soft,
            rng_seed: 0,
            query_cap: None,
            restart_each_round: false,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            AttackKind::Knockoff if self.query_budget == 0 => Err(Error::config("query_budget must be positive")),
            AttackKind::Jbda if self.seed_size == 0 => Err(Error::config("seed_size must be positive")),
            AttackKind::Jbda if !(self.jbda_step > 0.0 && self.jbda_step.is_finite()) => {
                Err(Error::config("jbda_step must be positive"))
            }
            _ if self.clone_epochs_per_round == 0 => Err(Error::config("clone_epochs_per_round must be positive")),
            _ => Ok(()),
        }
    }
}

/// Inputs the attacker sent and the probability vectors it got back.
#[derive(Debug, Clone, PartialEq)]
pub struct HarvestedDataset {
    pub inputs: Vec<Tensor>,
    pub targets: Vec<Vec<f64>>,
    pub source: AttackConfig,
}

impl HarvestedDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Stored in the dataset file format with the attack config as a JSON
    /// provenance header; labels hold the argmax of each target.
    pub fn to_file(&self, num_classes: usize) -> Result<DatasetFile> {
        let labels = self.targets.iter().map(|t| argmax(t)).collect();
        let dataset = LabeledDataset::new(
            format!("harvest-{}", self.source.kind.as_str()),
            Role::Surrogate,
            num_classes,
            self.inputs.clone(),
            labels,
        )?;
        let provenance = serde_json::to_string(&self.source).map_err(|e| Error::config(e.to_string()))?;
        Ok(DatasetFile { dataset, targets: Some(self.targets.clone()), provenance: Some(provenance) })
    }

    pub fn from_file(file: DatasetFile) -> Result<Self> {
        let provenance = file.provenance.ok_or_else(|| Error::config("harvest file lacks provenance"))?;
        let source = serde_json::from_str(&provenance).map_err(|e| Error::config(e.to_string()))?;
        let targets = file.targets.ok_or_else(|| Error::config("harvest file lacks targets"))?;
        Ok(HarvestedDataset { inputs: file.dataset.inputs().to_vec(), targets, source })
    }
}

/// Queries the victim with `budget` surrogate inputs: a shuffled pass without
/// replacement, then uniform draws with replacement once the pool runs out.
pub fn knockoff_harvest(
    victim: &dyn PredictionApi,
    user: UserId,
    surrogate: &LabeledDataset,
    cfg: &AttackConfig,
) -> Result<HarvestedDataset> {
    if surrogate.is_empty() {
        return Err(Error::config("surrogate dataset is empty"));
    }
    if cfg.query_budget == 0 {
        return Err(Error::config("query_budget must be positive"));
    }
    let mut r = rng(derive_seed(cfg.rng_seed, "knockoff-sample"));
    let mut order: Vec<usize> = (0..surrogate.len()).collect();
    order.shuffle(&mut r);
    order.truncate(cfg.query_budget);
    while order.len() < cfg.query_budget {
        order.push(r.random_range(0..surrogate.len()));
    }
    let inputs: Vec<Tensor> = order.iter().map(|&i| surrogate.inputs()[i].clone()).collect();
    let targets = inputs.iter().map(|x| victim.query(user, x)).collect::<Result<Vec<_>>>()?;
    Ok(HarvestedDataset { inputs, targets, source: cfg.clone() })
}

/// `x + step * sign(d/dx CE(clone(x), label))`, with `sign(0) = 0`.
pub fn jbda_synthesize(clone: &Classifier, x: &Tensor, label: usize, step: f64) -> Result<Tensor> {
    let g = clone.input_grad(x, &Objective::Label(label))?;
    let data = x
        .data()
        .iter()
        .zip(&g)
        .map(|(&v, &d)| {
            let s = if d > 0.0 {
                1.0
            } else if d < 0.0 {
                -1.0
            } else {
                0.0
            };
            v + step * s
        })
        .collect();
    Tensor::new(x.shape().to_vec(), data)
}

/// Layer list plus input shape; builds fresh clones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl Architecture {
    /// Same layers as `model` with init seeds derived from `seed`.
    pub fn like(model: &Classifier, seed: u64) -> Self {
        let layers = model
            .layers()
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let s = derive_seed(seed, &format!("layer{i}"));
                match l.clone() {
                    LayerSpec::Dense { inputs, outputs, .. } => LayerSpec::Dense { inputs, outputs, init_seed: s },
                    LayerSpec::Conv2dSmall { in_channels, out_channels, kernel, height, width, .. } => {
                        LayerSpec::Conv2dSmall { in_channels, out_channels, kernel, height, width, init_seed: s }
                    }
                    other => other,
                }
            })
            .collect();
        Architecture { input_shape: model.input_shape().to_vec(), layers }
    }

    pub fn build(&self) -> Result<Classifier> {
        Classifier::new(self.input_shape.clone(), self.layers.clone())
    }
}

fn objectives(targets: &[Vec<f64>], strategy: LabelStrategy) -> Vec<Objective> {
    targets
        .iter()
        .map(|t| match strategy {
            LabelStrategy::Soft => Objective::Soft(t.clone()),
            LabelStrategy::Argmax => Objective::Label(argmax(t)),
        })
        .collect()
}

fn continue_training(
    clone: &mut Classifier,
    inputs: &[Tensor],
    targets: &[Vec<f64>],
    cfg: &TrainConfig,
    strategy: LabelStrategy,
) -> Result<()> {
    fit(clone, inputs, &objectives(targets, strategy), None, cfg)?;
    Ok(())
}

/// Trains a fresh clone on harvested pairs.
pub fn train_clone(
    harvest: &HarvestedDataset,
    arch: &Architecture,
    cfg: &TrainConfig,
    strategy: LabelStrategy,
) -> Result<Classifier> {
    if harvest.is_empty() {
        return Err(Error::config("cannot train a clone on an empty harvest"));
    }
    let mut clone = arch.build()?;
    continue_training(&mut clone, &harvest.inputs, &harvest.targets, cfg, strategy)?;
    Ok(clone)
}

#[derive(Debug, Clone)]
pub struct JbdaOutcome {
    pub clone: Classifier,
    pub harvest: HarvestedDataset,
    /// Size of the harvested set after each training phase (seed first).
    pub round_sizes: Vec<usize>,
    /// The query cap stopped the attack before all rounds finished.
    pub halted: bool,
}

/// Jacobian-based dataset augmentation.
///
/// The seed set is labeled by the victim and the clone trained on it. Each
/// round perturbs every collected input along the sign of the clone's loss
/// gradient at the served label's argmax, labels the new points through the
/// victim, appends them and trains again, doubling the set per round.
/// `train_cfg.epochs` is overridden by `clone_epochs_per_round`.
pub fn jbda_attack(
    victim: &dyn PredictionApi,
    user: UserId,
    seed: &LabeledDataset,
    arch: &Architecture,
    cfg: &AttackConfig,
    train_cfg: &TrainConfig,
) -> Result<JbdaOutcome> {
    cfg.validate()?;
    if seed.is_empty() {
        return Err(Error::config("JBDA needs a non-empty seed set"));
    }
    let seed_points = seed.take(cfg.seed_size);
    let cap = cfg.query_cap.unwrap_or(usize::MAX);
    let mut queries = 0usize;
    let mut halted = false;

    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for x in seed_points.inputs() {
        if queries == cap {
            halted = true;
            break;
        }
        targets.push(victim.query(user, x)?);
        inputs.push(x.clone());
        queries += 1;
    }

    let round_cfg = |round: usize| TrainConfig {
        epochs: cfg.clone_epochs_per_round,
        rng_seed: derive_seed(train_cfg.rng_seed, &format!("round{round}")),
        ..train_cfg.clone()
    };
    let mut clone = arch.build()?;
    let mut round_sizes = Vec::with_capacity(cfg.rounds + 1);
    if !inputs.is_empty() {
        continue_training(&mut clone, &inputs, &targets, &round_cfg(0), cfg.label_strategy)?;
    }
    round_sizes.push(inputs.len());

    for round in 1..=cfg.rounds {
        if halted {
            break;
        }
        let n = inputs.len();
        for i in 0..n {
            if queries == cap {
                halted = true;
                break;
            }
            let x_new = jbda_synthesize(&clone, &inputs[i], argmax(&targets[i]), cfg.jbda_step)?;
            targets.push(victim.query(user, &x_new)?);
            inputs.push(x_new);
            queries += 1;
        }
        if cfg.restart_each_round {
            clone = arch.build()?;
        }
        continue_training(&mut clone, &inputs, &targets, &round_cfg(round), cfg.label_strategy)?;
        round_sizes.push(inputs.len());
    }

    Ok(JbdaOutcome { clone, harvest: HarvestedDataset { inputs, targets, source: cfg.clone() }, round_sizes, halted })
}
