use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nncore::{train, Classifier, LossKind, Tensor, TrainConfig, LOG_EPS};

use super::msp;

/// Trains `model` with reverse cross-entropy so that it is confidently wrong
/// on the defender's distribution.
pub fn train_misinformer(
    mut model: Classifier,
    defender_data: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<Classifier> {
    train(&mut model, defender_data, None, cfg, LossKind::Reverse)?;
    Ok(model)
}

/// `p^(1/T)` renormalized; `T < 1` sharpens.
pub fn sharpen(pred: &[f64], temperature: f64) -> Vec<f64> {
    let logs: Vec<f64> = pred.iter().map(|&p| p.max(LOG_EPS).ln() / temperature).collect();
    crate::nncore::softmax(&logs)
}

/// Maps misinformation confidence onto the defender's in-distribution
/// confidence. Fitted on held-out inputs: a misinformation answer whose MSP
/// sits at quantile `u` of the calibration misinformation MSPs is sharpened
/// (or smoothed) with the temperature that moves its MSP to quantile `u` of
/// the defender's calibration MSPs. The map is monotone, so more confident
/// misinformation stays more confident.
#[derive(Debug, Clone, PartialEq)]
pub struct MspMatcher {
    misinformer_msp: Vec<f64>,
    defender_msp: Vec<f64>,
}

impl MspMatcher {
    pub fn fit(defender: &Classifier, misinformer: &Classifier, inputs: &[Tensor]) -> Result<MspMatcher> {
        if inputs.is_empty() {
            return Err(Error::config("MSP matching needs calibration inputs"));
        }
        let sorted_msp = |m: &Classifier| -> Result<Vec<f64>> {
            let mut v: Vec<f64> = inputs.iter().map(|x| m.forward(x).map(|p| msp(&p))).collect::<Result<_>>()?;
            v.sort_by(f64::total_cmp);
            Ok(v)
        };
        Ok(MspMatcher { misinformer_msp: sorted_msp(misinformer)?, defender_msp: sorted_msp(defender)? })
    }

    /// The defender-side MSP that a misinformation MSP of `raw` maps to.
    pub fn target(&self, raw: f64) -> f64 {
        let m = &self.misinformer_msp;
        let below = m.partition_point(|&v| v < raw);
        let at_or_below = m.partition_point(|&v| v <= raw);
        let u = (below + at_or_below) as f64 / (2 * m.len()) as f64;
        let d = &self.defender_msp;
        let pos = u * (d.len() - 1) as f64;
        let i = (pos.floor() as usize).min(d.len() - 1);
        let j = (i + 1).min(d.len() - 1);
        d[i] + (pos - i as f64) * (d[j] - d[i])
    }

    /// The temperature that gives `pred` the MSP [`MspMatcher::target`]
    /// assigns it.
    pub fn temperature(&self, pred: &[f64]) -> f64 {
        let goal = self.target(msp(pred));
        // MSP falls as the temperature rises; bisect on its logarithm
        let (mut lo, mut hi) = (-12.0f64, 12.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if msp(&sharpen(pred, mid.exp())) > goal {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).exp()
    }

    pub fn apply(&self, pred: &[f64]) -> Vec<f64> {
        sharpen(pred, self.temperature(pred))
    }
}

/// Overlap coefficient of two MSP samples: the shared area of their
/// normalized 20-bin histograms over `[0, 1]`.
pub fn msp_overlap(a: &[f64], b: &[f64]) -> f64 {
    const BINS: usize = 20;
    let hist = |xs: &[f64]| {
        let mut h = [0.0; BINS];
        for &x in xs {
            h[((x * BINS as f64) as usize).min(BINS - 1)] += 1.0 / xs.len() as f64;
        }
        h
    };
    let (ha, hb) = (hist(a), hist(b));
    ha.iter().zip(&hb).map(|(x, y)| x.min(*y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::is_distribution;

    #[test]
    fn sharpen_identity_and_direction() {
        let p = [0.5, 0.3, 0.2];
        let same = sharpen(&p, 1.0);
        for (a, b) in same.iter().zip(&p) {
            assert!((a - b).abs() < 1e-12);
        }
        let s = sharpen(&p, 0.5);
        assert!(is_distribution(&s));
        assert!(s[0] > p[0]);
    }

    #[test]
    fn matcher_hits_quantile_targets() {
        let m = MspMatcher { misinformer_msp: vec![0.4, 0.5, 0.6], defender_msp: vec![0.8, 0.9, 0.95] };
        // median misinformation maps to the median defender MSP
        assert!((m.target(0.5) - 0.9).abs() < 1e-12);
        assert!(m.target(0.45) < m.target(0.55));
        let p = [0.5, 0.3, 0.2];
        let out = m.apply(&p);
        assert!(is_distribution(&out));
        assert!((msp(&out) - 0.9).abs() < 1e-9);
        // the argmax never moves
        assert_eq!(crate::prob::argmax(&out), 0);
    }

    #[test]
    fn overlap_bounds() {
        assert!((msp_overlap(&[0.91, 0.97], &[0.93, 0.99]) - 1.0).abs() < 1e-12);
        assert_eq!(msp_overlap(&[0.1], &[0.9]), 0.0);
    }
}
