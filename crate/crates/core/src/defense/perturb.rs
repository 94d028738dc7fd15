use crate::prob::{argmax, argmin};

/// Poison distribution for the prediction-poisoning baseline: all mass on
/// the least likely class (lowest index on ties).
///
/// This stands in for an optimized poisoning target; it is the simplest
/// choice that contradicts the prediction as strongly as possible.
pub fn poison_distribution(pred: &[f64]) -> Vec<f64> {
    let mut eta = vec![0.0; pred.len()];
    eta[argmin(pred)] = 1.0;
    eta
}

/// Top-1-preserving perturbation: moves a `magnitude` fraction of every
/// non-top entry towards the mean of the non-top entries. Normalization and
/// the argmax are unchanged; at magnitude 1 the non-top entries are equal.
pub fn dp_perturb(pred: &[f64], magnitude: f64) -> Vec<f64> {
    let top = argmax(pred);
    let k = pred.len();
    if k < 2 || magnitude == 0.0 {
        return pred.to_vec();
    }
    let rest: f64 = pred.iter().enumerate().filter(|&(i, _)| i != top).map(|(_, &p)| p).sum();
    let mean = rest / (k - 1) as f64;
    pred.iter().enumerate().map(|(i, &p)| if i == top { p } else { (1.0 - magnitude) * p + magnitude * mean }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::mix;
    use approx::assert_abs_diff_eq;

    #[test]
    fn poison_examples() {
        assert_eq!(poison_distribution(&[0.7, 0.2, 0.1]), vec![0.0, 0.0, 1.0]);
        assert_eq!(poison_distribution(&[0.25; 4]), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(poison_distribution(&[0.0, 1.0, 0.0]), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn pp_blend_example() {
        let f = [0.7, 0.2, 0.1];
        let y = mix(&f, &poison_distribution(&f), 0.5);
        for (a, b) in y.iter().zip([0.35, 0.1, 0.55]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!(mix(&f, &poison_distribution(&f), 0.0), f);
        assert_eq!(mix(&f, &poison_distribution(&f), 1.0), poison_distribution(&f));
    }

    #[test]
    fn dp_examples() {
        let f = [0.1, 0.6, 0.05, 0.25];
        assert_eq!(dp_perturb(&f, 0.0), f);
        let full = dp_perturb(&f, 1.0);
        assert_eq!(full[1], 0.6);
        for i in [0, 2, 3] {
            assert_abs_diff_eq!(full[i], 0.4 / 3.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(full.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }
}
