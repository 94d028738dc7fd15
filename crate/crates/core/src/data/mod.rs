//! Datasets and their roles: the defender's training and test data, the
//! outlier set used for outlier exposure, the attacker's surrogate data and
//! the attacker's small in-distribution seed set.

mod idx;
mod store;
mod synthetic;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::Tensor;
use crate::rng::rng;

pub use idx::{load_idx_images, save_idx, write_idx_images, write_idx_labels};
pub use store::{decode_dataset, encode_dataset, load_dataset, save_dataset, DatasetFile};
pub use synthetic::{generate_outliers, generate_surrogate, generate_synthetic, shift_vector, SyntheticTaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    DefenderTrain,
    DefenderTest,
    Outlier,
    Surrogate,
    Seed,
}

impl Role {
    pub const ALL: [Role; 5] = [Role::DefenderTrain, Role::DefenderTest, Role::Outlier, Role::Surrogate, Role::Seed];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::DefenderTrain => "defender-train",
            Role::DefenderTest => "defender-test",
            Role::Outlier => "outlier",
            Role::Surrogate => "surrogate",
            Role::Seed => "seed",
        }
    }

    pub(crate) fn code(self) -> u8 {
        Role::ALL.iter().position(|&r| r == self).unwrap() as u8
    }

    pub(crate) fn from_code(c: u8) -> Option<Role> {
        Role::ALL.get(c as usize).copied()
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Role> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown dataset role '{s}'")))
    }
}

/// Inputs of one shape with class labels. Unlabeled roles carry label 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    name: String,
    role: Role,
    num_classes: usize,
    inputs: Vec<Tensor>,
    labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(
        name: impl Into<String>,
        role: Role,
        num_classes: usize,
        inputs: Vec<Tensor>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::dim(format!("{} inputs but {} labels", inputs.len(), labels.len())));
        }
        if num_classes < 2 {
            return Err(Error::config("a dataset needs at least 2 classes"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Index { index: bad, len: num_classes });
        }
        if let Some(first) = inputs.first() {
            if inputs.iter().any(|x| x.shape() != first.shape()) {
                return Err(Error::dim("inputs must share one shape"));
            }
        }
        Ok(LabeledDataset { name: name.into(), role, num_classes, inputs, labels })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_shape(&self) -> Option<&[usize]> {
        self.inputs.first().map(Tensor::shape)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Tensor, usize)> {
        self.inputs.iter().zip(self.labels.iter().copied())
    }

    /// The first `n` examples, keeping name and role.
    pub fn take(&self, n: usize) -> LabeledDataset {
        let n = n.min(self.len());
        LabeledDataset {
            name: self.name.clone(),
            role: self.role,
            num_classes: self.num_classes,
            inputs: self.inputs[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }

    /// The same examples under another name and role.
    pub fn relabel(self, name: impl Into<String>, role: Role) -> LabeledDataset {
        LabeledDataset { name: name.into(), role, ..self }
    }

    fn subset(&self, idx: &[usize], suffix: &str) -> LabeledDataset {
        LabeledDataset {
            name: format!("{}-{suffix}", self.name),
            role: self.role,
            num_classes: self.num_classes,
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Shuffles with `rng_seed` and cuts at `round(fraction * len)`. Both halves
/// keep the input's role.
pub fn split(dataset: &LabeledDataset, fraction: f64, rng_seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config(format!("split fraction {fraction} must lie in (0, 1)")));
    }
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(&mut rng(rng_seed));
    let cut = (fraction * dataset.len() as f64).round() as usize;
    let (a, b) = idx.split_at(cut);
    Ok((dataset.subset(a, "a"), dataset.subset(b, "b")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numbered(n: usize) -> LabeledDataset {
        let inputs = (0..n).map(|i| Tensor::vector(vec![i as f64]).unwrap()).collect();
        let labels = (0..n).map(|i| i % 2).collect();
        LabeledDataset::new("n", Role::DefenderTrain, 2, inputs, labels).unwrap()
    }

    #[test]
    fn split_sizes_and_union() {
        let d = numbered(100);
        let (a, b) = split(&d, 0.8, 4).unwrap();
        assert_eq!((a.len(), b.len()), (80, 20));
        let mut seen: Vec<f64> = a.inputs().iter().chain(b.inputs()).map(|t| t.data()[0]).collect();
        seen.sort_by(f64::total_cmp);
        assert_eq!(seen, (0..100).map(|i| i as f64).collect::<Vec<_>>());
        for (x, y) in a.iter().chain(b.iter()) {
            assert_eq!(x.data()[0] as usize % 2, y);
        }
        assert_eq!(split(&d, 0.8, 4).unwrap(), (a, b));
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let d = numbered(10);
        for f in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(split(&d, f, 0), Err(Error::Config(_))));
        }
    }

    #[test]
    fn constructor_checks() {
        let x = || Tensor::vector(vec![0.0]).unwrap();
        assert!(LabeledDataset::new("d", Role::Seed, 2, vec![x()], vec![]).is_err());
        assert!(LabeledDataset::new("d", Role::Seed, 2, vec![x()], vec![2]).is_err());
        let mixed = vec![x(), Tensor::vector(vec![0.0, 1.0]).unwrap()];
        assert!(LabeledDataset::new("d", Role::Seed, 2, mixed, vec![0, 1]).is_err());
    }

    #[test]
    fn roles_parse_round_trip() {
        for r in Role::ALL {
            assert_eq!(r.as_str().parse::<Role>().unwrap(), r);
            assert_eq!(Role::from_code(r.code()), Some(r));
        }
    }
}
