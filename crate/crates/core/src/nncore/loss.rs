//! Losses over softmax outputs and their gradients with respect to the
//! pre-softmax logits.
//!
//! Every logarithm is taken of `max(p, LOG_EPS)`. Gradients are the exact
//! derivatives of the clamped expressions, so a clamped term contributes zero
//! gradient.

use crate::error::{Error, Result};

pub const LOG_EPS: f64 = 1e-12;

fn clamped_ln(p: f64) -> f64 {
    p.max(LOG_EPS).ln()
}

fn check_label(pred: &[f64], label: usize) -> Result<()> {
    if label >= pred.len() {
        return Err(Error::Index { index: label, len: pred.len() });
    }
    Ok(())
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-ln p[label]`.
pub fn cross_entropy(pred: &[f64], label: usize) -> Result<f64> {
    check_label(pred, label)?;
    Ok(-clamped_ln(pred[label]))
}

/// `-ln(1 - p[label])`: small when the model puts no mass on the true class.
pub fn reverse_cross_entropy(pred: &[f64], label: usize) -> Result<f64> {
    check_label(pred, label)?;
    Ok(-clamped_ln(mass_off(pred, label)))
}

/// Cross-entropy from the uniform distribution to `pred`.
pub fn cross_entropy_to_uniform(pred: &[f64]) -> f64 {
    let k = pred.len() as f64;
    -pred.iter().map(|&p| clamped_ln(p)).sum::<f64>() / k
}

/// `H(soft_target, pred)`.
pub fn distillation_loss(pred: &[f64], soft_target: &[f64]) -> Result<f64> {
    if pred.len() != soft_target.len() {
        return Err(Error::dim(format!("prediction has {} classes, target has {}", pred.len(), soft_target.len())));
    }
    Ok(soft_cross_entropy(pred, soft_target))
}

// 1 - p[label], summed from the other entries to avoid cancellation near 1.
fn mass_off(pred: &[f64], label: usize) -> f64 {
    pred.iter().enumerate().filter(|&(i, _)| i != label).map(|(_, &p)| p).sum()
}

fn soft_cross_entropy(pred: &[f64], target: &[f64]) -> f64 {
    -pred.iter().zip(target).map(|(&p, &t)| t * clamped_ln(p)).sum::<f64>()
}

// d/dz of -Σ t_j ln max(p_j, eps) with p = softmax(z):
// dz_i = -t_i [p_i > eps] + p_i Σ_j t_j [p_j > eps]
fn soft_cross_entropy_grad(pred: &[f64], target: &[f64]) -> Vec<f64> {
    let active: f64 = pred.iter().zip(target).filter(|(&p, _)| p > LOG_EPS).map(|(_, &t)| t).sum();
    pred.iter()
        .zip(target)
        .map(|(&p, &t)| {
            let own = if p > LOG_EPS { t } else { 0.0 };
            p * active - own
        })
        .collect()
}

/// What a single example is trained towards.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Cross-entropy against a hard label.
    Label(usize),
    /// Reverse cross-entropy against a hard label.
    Reverse(usize),
    /// Cross-entropy against a soft target distribution.
    Soft(Vec<f64>),
    /// Cross-entropy against the uniform distribution.
    Uniform,
}

impl Objective {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        match self {
            Objective::Label(y) | Objective::Reverse(y) if *y >= num_classes => {
                Err(Error::Index { index: *y, len: num_classes })
            }
            Objective::Soft(t) if t.len() != num_classes => {
                Err(Error::dim(format!("soft target has {} classes, model has {num_classes}", t.len())))
            }
            _ => Ok(()),
        }
    }

    /// Loss value at `pred`. Assumes `validate` passed.
    pub fn loss(&self, pred: &[f64]) -> f64 {
        match self {
            Objective::Label(y) => soft_cross_entropy(pred, &one_hot(pred.len(), *y)),
            Objective::Reverse(y) => -clamped_ln(mass_off(pred, *y)),
            Objective::Soft(t) => soft_cross_entropy(pred, t),
            Objective::Uniform => cross_entropy_to_uniform(pred),
        }
    }

    /// Gradient of `loss` with respect to the logits that produced `pred`.
    pub fn logit_grad(&self, pred: &[f64]) -> Vec<f64> {
        match self {
            Objective::Label(y) => soft_cross_entropy_grad(pred, &one_hot(pred.len(), *y)),
            Objective::Soft(t) => soft_cross_entropy_grad(pred, t),
            Objective::Uniform => {
                let k = pred.len();
                soft_cross_entropy_grad(pred, &vec![1.0 / k as f64; k])
            }
            Objective::Reverse(y) => {
                // L = -ln q, q = 1 - p_y; dq/dz_i = -p_y (δ_iy - p_i)
                let q = mass_off(pred, *y);
                if q <= LOG_EPS {
                    return vec![0.0; pred.len()];
                }
                let py = pred[*y];
                pred.iter().enumerate().map(|(i, &p)| if i == *y { py } else { -py * p / q }).collect()
            }
        }
    }
}

pub fn one_hot(k: usize, index: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[index] = 1.0;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn softmax_examples() {
        let p = softmax(&[0.0; 10]);
        assert!(p.iter().all(|&x| (x - 0.1).abs() < 1e-15));
        // direct evaluation: e^2, e^1, e^0 over their sum
        let (a, b, c) = (2f64.exp(), 1f64.exp(), 1.0);
        let s = a + b + c;
        let p = softmax(&[2.0, 1.0, 0.0]);
        assert_abs_diff_eq!(p[0], a / s, epsilon = 1e-15);
        assert_abs_diff_eq!(p[0], 0.6652, epsilon = 5e-5);
        assert_abs_diff_eq!(p[1], 0.2447, epsilon = 5e-5);
        assert_abs_diff_eq!(p[2], 0.0900, epsilon = 5e-5);
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&[0.0, 1.0], 1).unwrap(), 0.0);
        assert_abs_diff_eq!(cross_entropy(&[0.1; 10], 3).unwrap(), 10f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(cross_entropy(&[0.0, 1.0], 0).unwrap(), -(1e-12f64).ln());
        assert!(matches!(cross_entropy(&[0.5, 0.5], 2), Err(Error::Index { .. })));
    }

    #[test]
    fn reverse_cross_entropy_examples() {
        assert_eq!(reverse_cross_entropy(&[0.0, 1.0], 0).unwrap(), 0.0);
        assert_abs_diff_eq!(reverse_cross_entropy(&[0.5, 0.5], 0).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(reverse_cross_entropy(&[1.0, 0.0], 0).unwrap(), -(1e-12f64).ln());
    }

    #[test]
    fn uniform_cross_entropy_examples() {
        assert_abs_diff_eq!(cross_entropy_to_uniform(&[0.25; 4]), 4f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(cross_entropy_to_uniform(&[1.0, 0.0]), 13.8155, epsilon = 1e-4);
        let mut p = vec![0.01; 10];
        p[0] = 0.91;
        let direct = -(0.91f64.ln() + 9.0 * 0.01f64.ln()) / 10.0;
        assert_abs_diff_eq!(cross_entropy_to_uniform(&p), direct, epsilon = 1e-12);
        assert_abs_diff_eq!(direct, 4.154, epsilon = 5e-4);
    }

    #[test]
    fn distillation_examples() {
        assert_abs_diff_eq!(distillation_loss(&[0.25; 4], &[0.25; 4]).unwrap(), 4f64.ln(), epsilon = 1e-12);
        let p = [0.2, 0.5, 0.3];
        assert_eq!(distillation_loss(&p, &[0.0, 1.0, 0.0]).unwrap(), cross_entropy(&p, 1).unwrap());
        assert!(distillation_loss(&p, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn label_and_one_hot_soft_share_a_path() {
        let p = softmax(&[0.3, -1.2, 2.0, 0.1]);
        let a = Objective::Label(2).logit_grad(&p);
        let b = Objective::Soft(one_hot(4, 2)).logit_grad(&p);
        assert_eq!(a, b);
    }

    #[test]
    fn logit_gradients_match_finite_differences() {
        let z = [0.4, -0.7, 1.3, 0.05];
        let h = 1e-6;
        let objectives =
            [Objective::Label(1), Objective::Reverse(2), Objective::Soft(vec![0.1, 0.2, 0.3, 0.4]), Objective::Uniform];
        for obj in &objectives {
            let g = obj.logit_grad(&softmax(&z));
            for i in 0..z.len() {
                let mut zp = z;
                let mut zm = z;
                zp[i] += h;
                zm[i] -= h;
                let num = (obj.loss(&softmax(&zp)) - obj.loss(&softmax(&zm))) / (2.0 * h);
                assert_abs_diff_eq!(g[i], num, epsilon = 1e-8);
            }
        }
    }
}
