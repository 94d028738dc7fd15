use std::sync::Arc;

use serde::Serialize;

use super::{ExperimentConfig, ModelConfig};
use crate::attacks::{
    jbda_attack, knockoff_harvest, train_clone, Architecture, AttackConfig, AttackKind, HarvestedDataset,
};
use crate::data::{
    generate_outliers, generate_surrogate, generate_synthetic, load_idx_images, shift_vector, LabeledDataset, Role,
    SyntheticTaskSpec,
};
use crate::defense::{train_misinformer, DefendedModel, DefenseConfig, DefenseKind, UserId};
use crate::error::{Error, Result};
use crate::eval::accuracy;
use crate::nncore::{train, Classifier, LossKind, TrainConfig};
use crate::rng::derive_seed;

/// The attacker's user id in single-attacker runs.
pub const ATTACKER: UserId = 1;

/// Where one role's data came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub role: Role,
    pub name: String,
    pub source: String,
    pub seed: Option<u64>,
    pub count: usize,
}

/// Every dataset one run needs.
#[derive(Debug, Clone)]
pub struct Lab {
    pub seed: u64,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    /// In-distribution examples the JBDA attacker starts from.
    pub seed_set: LabeledDataset,
    pub surrogate: LabeledDataset,
    pub outliers: Option<LabeledDataset>,
    manifest: Vec<ManifestEntry>,
}

impl Lab {
    pub fn build(cfg: &ExperimentConfig, seed: u64) -> Result<Lab> {
        cfg.validate()?;
        if let Some(p) = &cfg.task.synthetic {
            let spec = SyntheticTaskSpec::separable(
                p.num_classes,
                p.input_dim,
                p.cluster_std,
                p.train_per_class,
                derive_seed(seed, "task"),
            )?;
            let stream = |tag: &str, n: usize| spec.with_seed(derive_seed(seed, tag)).with_samples(n);
            let seed_per_class = cfg.attack.seed_size.div_ceil(p.num_classes);
            let shift = shift_vector(&spec, p.surrogate_shift, derive_seed(seed, "shift"));
            let outliers = (p.outlier_count > 0)
                .then(|| generate_outliers(&spec, p.outlier_count, p.outlier_spread, derive_seed(seed, "outliers")))
                .transpose()?;
            let lab = Lab {
                seed,
                train: generate_synthetic(&stream("train", p.train_per_class), Role::DefenderTrain, "train")?,
                test: generate_synthetic(&stream("test", p.test_per_class), Role::DefenderTest, "test")?,
                seed_set: generate_synthetic(&stream("seed", seed_per_class), Role::Seed, "seed")?,
                surrogate: generate_surrogate(&stream("surrogate", p.surrogate_per_class), &shift, p.surrogate_scale)?,
                outliers,
                manifest: Vec::new(),
            };
            let source = |role: Role| match role {
                Role::Surrogate => {
                    format!("synthetic clusters shifted {}x std, widened {}x", p.surrogate_shift, p.surrogate_scale)
                }
                Role::Outlier => format!("synthetic clusters widened {}x", p.outlier_spread),
                _ => "synthetic clusters".to_string(),
            };
            let tag = |role: Role| match role {
                Role::DefenderTrain => "train",
                Role::DefenderTest => "test",
                Role::Seed => "seed",
                Role::Surrogate => "surrogate",
                Role::Outlier => "outliers",
            };
            Ok(lab.with_manifest(|role| (source(role), Some(derive_seed(seed, tag(role))))))
        } else {
            let t = cfg.task.idx.as_ref().expect("validated");
            let k = t.num_classes;
            let train = load_idx_images(&t.train_images, &t.train_labels, Role::DefenderTrain, k)?;
            let full_test = load_idx_images(&t.test_images, &t.test_labels, Role::DefenderTest, k)?;
            let n_seed = cfg.attack.seed_size.min(full_test.len() / 2);
            let n_test = full_test.len() - n_seed;
            let order: Vec<usize> = (0..full_test.len()).collect();
            let (test_idx, seed_idx) = order.split_at(n_test);
            let pick = |idx: &[usize], name: &str, role: Role| {
                LabeledDataset::new(
                    name,
                    role,
                    k,
                    idx.iter().map(|&i| full_test.inputs()[i].clone()).collect(),
                    idx.iter().map(|&i| full_test.labels()[i]).collect(),
                )
            };
            let surrogate = load_idx_images(&t.surrogate_images, &t.surrogate_labels, Role::Surrogate, k)?;
            let outliers = match (&t.outlier_images, &t.outlier_labels) {
                (Some(i), Some(l)) => Some(load_idx_images(i, l, Role::Outlier, k)?),
                _ => None,
            };
            let lab = Lab {
                seed,
                test: pick(test_idx, "test", Role::DefenderTest)?,
                seed_set: pick(seed_idx, "seed", Role::Seed)?,
                train,
                surrogate,
                outliers,
                manifest: Vec::new(),
            };
            let show = |p: &std::path::Path| p.display().to_string();
            Ok(lab.with_manifest(|role| {
                let src = match role {
                    Role::DefenderTrain => show(&t.train_images),
                    Role::DefenderTest => format!("{} (head)", show(&t.test_images)),
                    Role::Seed => format!("{} (tail)", show(&t.test_images)),
                    Role::Surrogate => show(&t.surrogate_images),
                    Role::Outlier => t.outlier_images.as_deref().map(show).unwrap_or_default(),
                };
                (src, None)
            }))
        }
    }

    fn with_manifest(mut self, describe: impl Fn(Role) -> (String, Option<u64>)) -> Lab {
        let sets = [&self.train, &self.test, &self.seed_set, &self.surrogate].into_iter().chain(self.outliers.as_ref());
        self.manifest = sets
            .map(|d| {
                let (source, seed) = describe(d.role());
                ManifestEntry { role: d.role(), name: d.name().to_string(), source, seed, count: d.len() }
            })
            .collect();
        self
    }

    /// One entry per dataset: role, name, source and generator seed.
    pub fn manifest(&self) -> &[ManifestEntry] {
        &self.manifest
    }

    pub fn num_classes(&self) -> usize {
        self.train.num_classes()
    }

    /// A fresh, untrained model of the configured architecture.
    pub fn model(&self, m: &ModelConfig, init_seed: u64) -> Result<Classifier> {
        let k = self.num_classes();
        match self.train.input_shape() {
            Some(&[d]) => Classifier::dense_mlp(d, m.hidden, k, init_seed),
            Some(&[h, w]) => Classifier::small_conv(h, w, m.conv_channels, m.conv_kernel, k, init_seed),
            other => Err(Error::dim(format!("no architecture for input shape {other:?}"))),
        }
    }

    fn schedule(&self, t: &TrainConfig, tag: &str) -> TrainConfig {
        TrainConfig { rng_seed: derive_seed(self.seed.wrapping_add(t.rng_seed), tag), ..t.clone() }
    }

    /// The defender's model, with outlier exposure when `oe_weight > 0`.
    pub fn train_defender(&self, cfg: &ExperimentConfig) -> Result<Classifier> {
        let mut model = self.model(&cfg.defender, derive_seed(self.seed, "defender-init"))?;
        let schedule = self.schedule(&cfg.defender.train, "defender-train");
        let kind = if schedule.oe_weight > 0.0 { LossKind::StandardOe } else { LossKind::Standard };
        train(&mut model, &self.train, self.outliers.as_ref(), &schedule, kind)?;
        Ok(model)
    }

    pub fn train_misinformer(&self, cfg: &ExperimentConfig) -> Result<Classifier> {
        let model = self.model(&cfg.misinformer, derive_seed(self.seed, "misinformer-init"))?;
        train_misinformer(model, &self.train, &self.schedule(&cfg.misinformer.train, "misinformer-train"))
    }

    pub fn clone_schedule(&self, cfg: &ExperimentConfig) -> TrainConfig {
        self.schedule(&cfg.clone, "clone-train")
    }
}

/// A lab with its trained defender and misinformation model.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub lab: Lab,
    pub defender: Arc<Classifier>,
    pub misinformer: Arc<Classifier>,
}

/// One attack's products.
#[derive(Debug, Clone)]
pub struct AttackRun {
    pub clone: Classifier,
    pub harvest: HarvestedDataset,
    /// Clone accuracy on the defender's test set.
    pub clone_accuracy: f64,
    /// The JBDA query cap ended the attack early.
    pub halted: bool,
}

impl SeedRun {
    pub fn prepare(cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
        let lab = Lab::build(cfg, seed)?;
        let defender = Arc::new(lab.train_defender(cfg)?);
        let misinformer = Arc::new(lab.train_misinformer(cfg)?);
        Ok(SeedRun { lab, defender, misinformer })
    }

    /// The defender behind `defense`. MSP matching, when requested, is fitted
    /// on the defender's training inputs.
    pub fn defended(&self, defense: &DefenseConfig) -> Result<DefendedModel> {
        let mut d = DefendedModel::new(self.defender.clone(), Some(self.misinformer.clone()), defense.clone())?;
        if defense.kind == DefenseKind::Am && defense.match_msp {
            d.calibrate_msp_matching(self.lab.train.inputs())?;
        }
        Ok(d)
    }

    pub fn defender_accuracy(&self, defense: &DefenseConfig) -> Result<f64> {
        accuracy(&self.defended(defense)?, &self.lab.test)
    }

    /// Runs `attack` against `victim` as user [`ATTACKER`]. The clone copies
    /// the defender's architecture with its own initialization.
    pub fn attack(&self, cfg: &ExperimentConfig, victim: &DefendedModel, attack: &AttackConfig) -> Result<AttackRun> {
        let attack = AttackConfig {
            rng_seed: derive_seed(self.lab.seed.wrapping_add(attack.rng_seed), "attack"),
            ..attack.clone()
        };
        let arch = Architecture::like(&self.defender, derive_seed(self.lab.seed, "clone-init"));
        let schedule = self.lab.clone_schedule(cfg);
        let (clone, harvest, halted) = match attack.kind {
            AttackKind::Knockoff => {
                let harvest = knockoff_harvest(victim, ATTACKER, &self.lab.surrogate, &attack)?;
                let clone = train_clone(&harvest, &arch, &schedule, attack.label_strategy)?;
                (clone, harvest, false)
            }
            AttackKind::Jbda => {
                let out = jbda_attack(victim, ATTACKER, &self.lab.seed_set, &arch, &attack, &schedule)?;
                (out.clone, out.harvest, out.halted)
            }
        };
        let clone_accuracy = accuracy(&clone, &self.lab.test)?;
        Ok(AttackRun { clone, harvest, clone_accuracy, halted })
    }
}

/// Largest `tau` in `[0, 1]` whose defended test accuracy stays within
/// `max_drop` of the undefended accuracy, by bisection.
pub fn calibrate_tau(run: &SeedRun, base: &DefenseConfig, max_drop: f64) -> Result<f64> {
    let target = accuracy(run.defender.as_ref(), &run.lab.test)? - max_drop;
    let acc = |tau: f64| run.defender_accuracy(&DefenseConfig { kind: DefenseKind::Am, tau, ..base.clone() });
    if acc(1.0)? >= target {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if acc(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
