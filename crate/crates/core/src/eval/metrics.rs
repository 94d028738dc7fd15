use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::defense::{msp, DefendedModel};
use crate::error::{Error, Result};
use crate::nncore::{Classifier, Tensor};
use crate::prob::argmax;

/// Anything that maps an input to a probability vector without side effects.
pub trait Predictor {
    fn predict_probs(&self, x: &Tensor) -> Result<Vec<f64>>;
}

impl Predictor for Classifier {
    fn predict_probs(&self, x: &Tensor) -> Result<Vec<f64>> {
        self.forward(x)
    }
}

/// Goes through the full defense, so the defended accuracy is what benign
/// users actually see. Does not count as a query for auditing.
impl Predictor for DefendedModel {
    fn predict_probs(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(self.respond(x)?.probs)
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn predict_probs(&self, x: &Tensor) -> Result<Vec<f64>> {
        (**self).predict_probs(x)
    }
}

/// Fraction of examples whose argmax matches the label.
pub fn accuracy(model: &impl Predictor, test: &LabeledDataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::config("accuracy needs a non-empty test set"));
    }
    let mut correct = 0usize;
    for (x, y) in test.iter() {
        if argmax(&model.predict_probs(x)?) == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// `(1/sqrt 2) * || sqrt p - sqrt q ||_2`.
pub fn hellinger(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::dim(format!("distributions have {} and {} entries", p.len(), q.len())));
    }
    let s: f64 = p.iter().zip(q).map(|(&a, &b)| (a.max(0.0).sqrt() - b.max(0.0).sqrt()).powi(2)).sum();
    Ok((s / 2.0).sqrt().min(1.0))
}

/// Empirical CDF: `values` ascending, `fractions[i] = (i + 1) / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfSeries {
    pub label: String,
    pub values: Vec<f64>,
    pub fractions: Vec<f64>,
}

impl CdfSeries {
    pub fn from_samples(label: impl Into<String>, mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::config("a CDF needs at least one sample"));
        }
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        let fractions = (1..=samples.len()).map(|i| i as f64 / n).collect();
        Ok(CdfSeries { label: label.into(), values: samples, fractions })
    }

    pub fn is_valid(&self) -> bool {
        self.values.len() == self.fractions.len()
            && !self.values.is_empty()
            && self.values.windows(2).all(|w| w[0] <= w[1])
            && self.fractions.windows(2).all(|w| w[0] <= w[1])
            && self.fractions.iter().all(|f| (0.0..=1.0).contains(f))
            && self.fractions.last() == Some(&1.0)
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.values.partition_point(|&v| v <= x);
        k as f64 / self.values.len() as f64
    }

    pub fn median(&self) -> f64 {
        let n = self.values.len();
        if n % 2 == 1 {
            self.values[n / 2]
        } else {
            0.5 * (self.values[n / 2 - 1] + self.values[n / 2])
        }
    }
}

/// CDF of the raw defender's MSP over the queries.
pub fn msp_cdf(model: &Classifier, queries: &LabeledDataset, label: &str) -> Result<CdfSeries> {
    let samples = queries.inputs().iter().map(|x| model.forward(x).map(|p| msp(&p))).collect::<Result<_>>()?;
    CdfSeries::from_samples(label, samples)
}

/// CDF of the Hellinger distance between the undefended prediction and the
/// served one.
pub fn hellinger_cdf(
    defended: &DefendedModel,
    reference: &Classifier,
    queries: &LabeledDataset,
    label: &str,
) -> Result<CdfSeries> {
    let samples = queries
        .inputs()
        .iter()
        .map(|x| hellinger(&reference.forward(x)?, &defended.respond(x)?.probs))
        .collect::<Result<_>>()?;
    CdfSeries::from_samples(label, samples)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { 1.0 };
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}
