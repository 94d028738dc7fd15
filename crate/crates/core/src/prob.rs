//! Helpers over probability vectors (`&[f64]` summing to one).

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Index of the smallest entry; ties go to the lowest index.
pub fn argmin(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v < p[best] {
            best = i;
        }
    }
    best
}

/// Tolerance used when checking that a vector sums to one.
pub const SUM_TOLERANCE: f64 = 1e-6;

pub fn is_distribution(p: &[f64]) -> bool {
    !p.is_empty()
        && p.iter().all(|&v| v.is_finite() && (0.0..=1.0).contains(&v))
        && (p.iter().sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE
}

/// `(1 - alpha) * a + alpha * b`, entrywise.
pub fn mix(a: &[f64], b: &[f64], alpha: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| (1.0 - alpha) * x + alpha * y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_break_low() {
        assert_eq!(argmax(&[0.25; 4]), 0);
        assert_eq!(argmin(&[0.25; 4]), 0);
        assert_eq!(argmax(&[0.1, 0.45, 0.45]), 1);
        assert_eq!(argmin(&[1.0, 0.0, 0.0]), 1);
    }

    #[test]
    fn mix_endpoints_are_exact() {
        let a = [0.8, 0.2];
        let b = [0.1, 0.9];
        assert_eq!(mix(&a, &b, 0.0), a.to_vec());
        assert_eq!(mix(&a, &b, 1.0), b.to_vec());
    }
}
