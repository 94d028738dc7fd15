//! Experiment configuration and the per-seed pipeline: build the datasets,
//! train the defender (with outlier exposure) and the misinformation model,
//! wrap them in a defense and attack the result.

mod pipeline;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attacks::{AttackConfig, AttackKind};
use crate::defense::{DefenseConfig, DefenseKind};
use crate::error::{Error, Result};
use crate::nncore::TrainConfig;

pub use pipeline::{calibrate_tau, AttackRun, Lab, ManifestEntry, SeedRun, ATTACKER};

/// Synthetic clusters plus the surrogate and outlier distributions derived
/// from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticPreset {
    pub num_classes: usize,
    pub input_dim: usize,
    pub cluster_std: f64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Surrogate shift length in multiples of `cluster_std`.
    pub surrogate_shift: f64,
    /// Surrogate spread relative to `cluster_std`.
    pub surrogate_scale: f64,
    pub surrogate_per_class: usize,
    pub outlier_count: usize,
    /// Outlier spread in multiples of `cluster_std`.
    pub outlier_spread: f64,
}

impl Default for SyntheticPreset {
    fn default() -> Self {
        SyntheticPreset {
            num_classes: 10,
            input_dim: 16,
            cluster_std: 0.05,
            train_per_class: 100,
            test_per_class: 50,
            surrogate_shift: 6.0,
            surrogate_scale: 4.0,
            surrogate_per_class: 100,
            outlier_count: 2000,
            outlier_spread: 5.0,
        }
    }
}

/// IDX image files. The JBDA seed set is cut from the end of the test file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdxTask {
    pub num_classes: usize,
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
    pub surrogate_images: PathBuf,
    pub surrogate_labels: PathBuf,
    pub outlier_images: Option<PathBuf>,
    pub outlier_labels: Option<PathBuf>,
}

/// Exactly one of the two sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub synthetic: Option<SyntheticPreset>,
    pub idx: Option<IdxTask>,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig { synthetic: Some(SyntheticPreset::default()), idx: None }
    }
}

/// Architecture and training schedule of one model. Vector inputs get a
/// one-hidden-layer MLP, image inputs a single small convolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden: usize,
    pub conv_channels: usize,
    pub conv_kernel: usize,
    pub train: TrainConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { hidden: 64, conv_channels: 4, conv_kernel: 5, train: TrainConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Runs use seeds `rng_seed, rng_seed + 1, ...`.
    pub num_seeds: usize,
    pub defenses: Vec<DefenseKind>,
    pub attacks: Vec<AttackKind>,
    pub tau: Vec<f64>,
    pub alpha_pp: Vec<f64>,
    pub dp_magnitude: Vec<f64>,
    /// Minimum acceptable defender accuracy; points below it are flagged.
    pub accuracy_floor: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            num_seeds: 3,
            defenses: vec![DefenseKind::Am, DefenseKind::Pp, DefenseKind::Dp],
            attacks: vec![AttackKind::Knockoff, AttackKind::Jbda],
            tau: vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95],
            alpha_pp: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            dp_magnitude: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            accuracy_floor: None,
        }
    }
}

impl SweepConfig {
    pub fn knobs(&self, kind: DefenseKind) -> &[f64] {
        match kind {
            DefenseKind::Am => &self.tau,
            DefenseKind::Pp => &self.alpha_pp,
            DefenseKind::Dp => &self.dp_magnitude,
            DefenseKind::None => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub rng_seed: u64,
    /// Parent of the run directory; not part of the config hash.
    pub out_dir: PathBuf,
    pub task: TaskConfig,
    pub defender: ModelConfig,
    pub misinformer: ModelConfig,
    /// Knockoff clones train for `clone.epochs`; JBDA uses the attack's
    /// per-round epochs with the rest of this schedule.
    pub clone: TrainConfig,
    pub defense: DefenseConfig,
    pub attack: AttackConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            rng_seed: 1,
            out_dir: PathBuf::from("runs"),
            task: TaskConfig::default(),
            defender: ModelConfig {
                train: TrainConfig { learning_rate: 0.2, epochs: 150, ..TrainConfig::default() },
                ..ModelConfig::default()
            },
            misinformer: ModelConfig {
                train: TrainConfig { oe_weight: 0.0, ..TrainConfig::default() },
                ..ModelConfig::default()
            },
            clone: TrainConfig { learning_rate: 0.2, epochs: 100, batch_size: 16, oe_weight: 0.0, rng_seed: 0 },
            defense: DefenseConfig::am(0.7),
            attack: AttackConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::config(format!("config file {} not found", path.display())),
            _ => Error::Io(e),
        })?;
        ExperimentConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.task.synthetic, &self.task.idx) {
            (Some(s), None) => {
                if s.num_classes < 2 || s.input_dim == 0 {
                    return Err(Error::config("task.synthetic needs num_classes >= 2 and input_dim >= 1"));
                }
                if !(s.cluster_std > 0.0 && s.cluster_std.is_finite()) {
                    return Err(Error::config("task.synthetic.cluster_std must be positive"));
                }
                if s.train_per_class == 0 || s.test_per_class == 0 || s.surrogate_per_class == 0 {
                    return Err(Error::config("task.synthetic sample counts must be positive"));
                }
                if s.surrogate_scale.is_nan() || s.surrogate_scale <= 0.0 {
                    return Err(Error::config("task.synthetic.surrogate_scale must be positive"));
                }
                if self.defender.train.oe_weight > 0.0 && s.outlier_count == 0 {
                    return Err(Error::config(
                        "task.synthetic.outlier_count must be positive when defender.train.oe_weight > 0",
                    ));
                }
            }
            (None, Some(i)) => {
                if i.num_classes < 2 {
                    return Err(Error::config("task.idx.num_classes must be at least 2"));
                }
                if self.defender.train.oe_weight > 0.0 && (i.outlier_images.is_none() || i.outlier_labels.is_none()) {
                    return Err(Error::config(
                        "task.idx.outlier_images and outlier_labels are required when defender.train.oe_weight > 0",
                    ));
                }
            }
            _ => return Err(Error::config("task needs exactly one of task.synthetic or task.idx")),
        }
        for (name, m) in [("defender", &self.defender), ("misinformer", &self.misinformer)] {
            m.train.validate().map_err(|e| Error::config(format!("{name}.train: {e}")))?;
            if m.hidden == 0 || m.conv_channels == 0 || m.conv_kernel == 0 {
                return Err(Error::config(format!("{name}: layer sizes must be positive")));
            }
        }
        self.clone.validate().map_err(|e| Error::config(format!("clone: {e}")))?;
        self.defense.validate().map_err(|e| Error::config(format!("defense: {e}")))?;
        self.attack.validate().map_err(|e| Error::config(format!("attack: {e}")))?;
        let s = &self.sweep;
        if s.num_seeds == 0 {
            return Err(Error::config("sweep.num_seeds must be positive"));
        }
        for &kind in &s.defenses {
            let knobs = s.knobs(kind);
            if knobs.is_empty() {
                return Err(Error::config(format!("sweep grid for {} is empty", kind.as_str())));
            }
            if knobs.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::config(format!("sweep grid for {} must lie in [0, 1]", kind.as_str())));
            }
        }
        if let Some(f) = s.accuracy_floor {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::config("sweep.accuracy_floor must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form (sorted keys, `out_dir`
    /// omitted), truncated to 12 characters.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("out_dir");
        }
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    /// `out_dir/<hash>`.
    pub fn run_dir(&self) -> PathBuf {
        self.out_dir.join(self.hash())
    }

    /// The `i`-th run seed.
    pub fn seed(&self, i: usize) -> u64 {
        self.rng_seed.wrapping_add(i as u64)
    }
}
