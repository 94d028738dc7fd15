use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Role};
use crate::error::{Error, Result};
use crate::nncore::Tensor;
use crate::rng::{derive_seed, rng};

/// Gaussian clusters, one per class, standing in for the defender's domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTaskSpec {
    pub num_classes: usize,
    pub input_dim: usize,
    pub cluster_centers: Vec<Vec<f64>>,
    pub cluster_std: f64,
    pub samples_per_class: usize,
    pub rng_seed: u64,
}

impl SyntheticTaskSpec {
    /// Centers drawn uniformly from `[0.2, 0.8]^input_dim`, redrawn until
    /// every pair is more than `4 * cluster_std` apart.
    pub fn separable(
        num_classes: usize,
        input_dim: usize,
        cluster_std: f64,
        samples_per_class: usize,
        rng_seed: u64,
    ) -> Result<Self> {
        if num_classes < 2 || input_dim == 0 {
            return Err(Error::config("need at least 2 classes and 1 input dimension"));
        }
        let mut r = rng(derive_seed(rng_seed, "centers"));
        for _ in 0..1000 {
            let centers: Vec<Vec<f64>> =
                (0..num_classes).map(|_| (0..input_dim).map(|_| r.random_range(0.2..0.8)).collect()).collect();
            let spec = SyntheticTaskSpec {
                num_classes,
                input_dim,
                cluster_centers: centers,
                cluster_std,
                samples_per_class,
                rng_seed,
            };
            if spec.is_separable() {
                return Ok(spec);
            }
        }
        Err(Error::config("could not place separable centers; lower cluster_std"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::config("num_classes must be at least 2"));
        }
        if self.cluster_centers.len() != self.num_classes
            || self.cluster_centers.iter().any(|c| c.len() != self.input_dim)
        {
            return Err(Error::config("one center of length input_dim per class required"));
        }
        if !(self.cluster_std >= 0.0 && self.cluster_std.is_finite()) {
            return Err(Error::config("cluster_std must be nonnegative"));
        }
        if self.samples_per_class == 0 {
            return Err(Error::config("samples_per_class must be positive"));
        }
        Ok(())
    }

    /// Every pair of centers is more than `4 * cluster_std` apart.
    pub fn is_separable(&self) -> bool {
        let c = &self.cluster_centers;
        (0..c.len()).all(|i| (i + 1..c.len()).all(|j| distance(&c[i], &c[j]) > 4.0 * self.cluster_std))
    }

    /// Same clusters, different sample stream.
    pub fn with_seed(&self, rng_seed: u64) -> Self {
        SyntheticTaskSpec { rng_seed, ..self.clone() }
    }

    pub fn with_samples(&self, samples_per_class: usize) -> Self {
        SyntheticTaskSpec { samples_per_class, ..self.clone() }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn gaussian_blobs(centers: &[Vec<f64>], std: f64, per_center: usize, seed: u64) -> Result<(Vec<Tensor>, Vec<usize>)> {
    let mut r = rng(seed);
    let normal = Normal::new(0.0, 1.0).map_err(|e| Error::config(e.to_string()))?;
    let mut inputs = Vec::with_capacity(centers.len() * per_center);
    let mut labels = Vec::with_capacity(centers.len() * per_center);
    // Interleave classes so that any prefix is roughly balanced.
    for _ in 0..per_center {
        for (class, center) in centers.iter().enumerate() {
            let x = center.iter().map(|&m| m + std * normal.sample(&mut r)).collect();
            inputs.push(Tensor::vector(x)?);
            labels.push(class);
        }
    }
    Ok((inputs, labels))
}

/// `num_classes * samples_per_class` labeled samples around the centers.
pub fn generate_synthetic(spec: &SyntheticTaskSpec, role: Role, name: &str) -> Result<LabeledDataset> {
    spec.validate()?;
    let (inputs, labels) =
        gaussian_blobs(&spec.cluster_centers, spec.cluster_std, spec.samples_per_class, spec.rng_seed)?;
    LabeledDataset::new(name, role, spec.num_classes, inputs, labels)
}

/// The defender's clusters moved by `shift` and widened by `scale`, unlabeled.
pub fn generate_surrogate(spec: &SyntheticTaskSpec, shift: &[f64], scale: f64) -> Result<LabeledDataset> {
    spec.validate()?;
    if shift.len() != spec.input_dim {
        return Err(Error::dim(format!("shift has {} entries, inputs have {}", shift.len(), spec.input_dim)));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::config("surrogate scale must be positive"));
    }
    let centers: Vec<Vec<f64>> =
        spec.cluster_centers.iter().map(|c| c.iter().zip(shift).map(|(a, b)| a + b).collect()).collect();
    let (inputs, _) = gaussian_blobs(&centers, spec.cluster_std * scale, spec.samples_per_class, spec.rng_seed)?;
    let labels = vec![0; inputs.len()];
    LabeledDataset::new("surrogate", Role::Surrogate, spec.num_classes, inputs, labels)
}

/// A shift of length `multiple * cluster_std` in a seeded random direction.
pub fn shift_vector(spec: &SyntheticTaskSpec, multiple: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(derive_seed(seed, "shift"));
    let dir: Vec<f64> = (0..spec.input_dim).map(|_| r.sample(StandardNormal)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    dir.into_iter().map(|v| v / norm * multiple * spec.cluster_std).collect()
}

/// Outlier-exposure data: the defender's clusters inflated to
/// `spread * cluster_std` around randomly chosen centers. Unshifted, so it
/// is distinct in construction from the surrogate blobs.
pub fn generate_outliers(spec: &SyntheticTaskSpec, count: usize, spread: f64, seed: u64) -> Result<LabeledDataset> {
    spec.validate()?;
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::config("outlier spread must be positive"));
    }
    let mut r = rng(seed);
    let std = spread * spec.cluster_std;
    let inputs = (0..count)
        .map(|_| {
            let c = &spec.cluster_centers[r.random_range(0..spec.num_classes)];
            Tensor::vector(c.iter().map(|&m| m + std * r.sample::<f64, _>(StandardNormal)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new("outliers", Role::Outlier, spec.num_classes, inputs, vec![0; count])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SyntheticTaskSpec {
        SyntheticTaskSpec::separable(3, 4, 0.05, 20, 1).unwrap()
    }

    #[test]
    fn deterministic_and_sized() {
        let s = spec();
        let a = generate_synthetic(&s, Role::DefenderTrain, "t").unwrap();
        assert_eq!(a.len(), 60);
        assert_eq!(a, generate_synthetic(&s, Role::DefenderTrain, "t").unwrap());
        assert_ne!(a, generate_synthetic(&s.with_seed(2), Role::DefenderTrain, "t").unwrap());
        assert!(s.is_separable());
    }

    #[test]
    fn zero_std_collapses_to_centers() {
        let s = SyntheticTaskSpec { cluster_std: 0.0, ..spec() };
        let d = generate_synthetic(&s, Role::DefenderTrain, "t").unwrap();
        for (x, y) in d.iter() {
            assert_eq!(x.data(), s.cluster_centers[y].as_slice());
        }
    }

    #[test]
    fn unshifted_surrogate_matches_defender_samples() {
        let s = spec();
        let d = generate_synthetic(&s, Role::DefenderTrain, "t").unwrap();
        let sur = generate_surrogate(&s, &[0.0; 4], 1.0).unwrap();
        assert_eq!(sur.inputs(), d.inputs());
        assert!(sur.labels().iter().all(|&y| y == 0));
        assert_eq!(sur.role(), Role::Surrogate);
    }

    #[test]
    fn shift_vector_has_requested_length() {
        let s = spec();
        let v = shift_vector(&s, 6.0, 3);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 0.3).abs() < 1e-12);
    }
}
