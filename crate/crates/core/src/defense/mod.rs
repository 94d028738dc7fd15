//! Query-time defenses.
//!
//! A [`DefendedModel`] wraps the defender's classifier and answers queries
//! with a probability vector. With adaptive misinformation (`am`) the
//! maximum softmax probability of the defender's output decides, through a
//! reverse sigmoid, how much of the answer comes from a misinformation model
//! trained to be wrong. `dp` and `pp` are the perturbation baselines.

mod audit;
mod misinformation;
mod perturb;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::{Classifier, Tensor};
use crate::prob::mix;

pub use audit::{AuditRecord, UserId};
pub use misinformation::{msp_overlap, sharpen, train_misinformer, MspMatcher};
pub use perturb::{dp_perturb, poison_distribution};

use audit::AuditState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefenseKind {
    None,
    Am,
    Dp,
    Pp,
}

impl DefenseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DefenseKind::None => "none",
            DefenseKind::Am => "am",
            DefenseKind::Dp => "dp",
            DefenseKind::Pp => "pp",
        }
    }
}

pub const DEFAULT_NU: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DefenseConfig {
    pub kind: DefenseKind,
    /// MSP threshold of the OOD detector.
    pub tau: f64,
    /// Growth rate of the reverse sigmoid.
    pub nu: f64,
    /// Weight of the poison distribution for `pp`.
    pub alpha_pp: f64,
    /// Fraction of non-top mass flattened by `dp`.
    pub dp_magnitude: f64,
    /// Sharpen misinformation outputs so their MSP resembles in-distribution answers.
    pub match_msp: bool,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        DefenseConfig {
            kind: DefenseKind::None,
            tau: 0.5,
            nu: DEFAULT_NU,
            alpha_pp: 0.0,
            dp_magnitude: 0.0,
            match_msp: false,
        }
    }
}

impl DefenseConfig {
    pub fn none() -> Self {
        DefenseConfig::default()
    }

    pub fn am(tau: f64) -> Self {
        DefenseConfig { kind: DefenseKind::Am, tau, ..Default::default() }
    }

    pub fn pp(alpha_pp: f64) -> Self {
        DefenseConfig { kind: DefenseKind::Pp, alpha_pp, ..Default::default() }
    }

    pub fn dp(dp_magnitude: f64) -> Self {
        DefenseConfig { kind: DefenseKind::Dp, dp_magnitude, ..Default::default() }
    }

    /// Checks only the fields the active kind reads.
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            DefenseKind::None => Ok(()),
            DefenseKind::Am => {
                if !(0.0..=1.0).contains(&self.tau) {
                    return Err(Error::config(format!("tau {} must lie in [0, 1]", self.tau)));
                }
                if !(self.nu > 0.0 && self.nu.is_finite()) {
                    return Err(Error::config("nu must be positive"));
                }
                Ok(())
            }
            DefenseKind::Pp if !(0.0..=1.0).contains(&self.alpha_pp) => {
                Err(Error::config(format!("alpha_pp {} must lie in [0, 1]", self.alpha_pp)))
            }
            DefenseKind::Dp if !(0.0..=1.0).contains(&self.dp_magnitude) => {
                Err(Error::config(format!("dp_magnitude {} must lie in [0, 1]", self.dp_magnitude)))
            }
            _ => Ok(()),
        }
    }
}

/// Maximum softmax probability.
pub fn msp(pred: &[f64]) -> f64 {
    pred.iter().cloned().fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detection {
    Id,
    Ood,
}

/// In-distribution iff the MSP strictly exceeds `tau`.
pub fn ood_detect(pred: &[f64], tau: f64) -> Detection {
    if msp(pred) > tau {
        Detection::Id
    } else {
        Detection::Ood
    }
}

/// `1 / (1 + exp(nu * (y_max - tau)))`, saturating to exactly 0 or 1 once
/// `|nu * (y_max - tau)| > 700`.
pub fn blend_coefficient(y_max: f64, tau: f64, nu: f64) -> f64 {
    let z = nu * (y_max - tau);
    if z > 700.0 {
        0.0
    } else if z < -700.0 {
        1.0
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// `(1 - alpha) * f + alpha * f_hat`.
pub fn am_blend(f: &[f64], f_hat: &[f64], alpha: f64) -> Vec<f64> {
    mix(f, f_hat, alpha)
}

/// What the defense served for one query, plus the detector's view of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub probs: Vec<f64>,
    /// MSP of the undefended prediction.
    pub msp: f64,
    /// Weight given to the non-truthful component (AM alpha or PP alpha).
    pub alpha: f64,
    /// Detector verdict was OOD (adaptive misinformation only).
    pub flagged: bool,
}

/// Black-box prediction service as seen by a client.
pub trait PredictionApi: Sync {
    fn num_classes(&self) -> usize;
    fn input_shape(&self) -> &[usize];
    /// Answers one query on behalf of `user`.
    fn query(&self, user: UserId, x: &Tensor) -> Result<Vec<f64>>;
}

/// The defender's model behind one defense policy.
#[derive(Debug)]
pub struct DefendedModel {
    defender: Arc<Classifier>,
    misinformer: Option<Arc<Classifier>>,
    config: DefenseConfig,
    msp_matcher: Option<MspMatcher>,
    audit: AuditState,
}

impl DefendedModel {
    pub fn new(defender: Arc<Classifier>, misinformer: Option<Arc<Classifier>>, config: DefenseConfig) -> Result<Self> {
        config.validate()?;
        if config.kind == DefenseKind::Am {
            let Some(m) = &misinformer else {
                return Err(Error::config("adaptive misinformation needs a misinformation model"));
            };
            if m.num_classes() != defender.num_classes() || m.input_shape() != defender.input_shape() {
                return Err(Error::config("misinformation model must match the defender's interface"));
            }
        }
        Ok(DefendedModel { defender, misinformer, config, msp_matcher: None, audit: AuditState::default() })
    }

    pub fn undefended(defender: Arc<Classifier>) -> Self {
        DefendedModel::new(defender, None, DefenseConfig::none()).expect("default config is valid")
    }

    pub fn config(&self) -> &DefenseConfig {
        &self.config
    }

    pub fn defender(&self) -> &Classifier {
        &self.defender
    }

    pub fn misinformer(&self) -> Option<&Classifier> {
        self.misinformer.as_deref()
    }

    pub fn msp_matcher(&self) -> Option<&MspMatcher> {
        self.msp_matcher.as_ref()
    }

    /// Fits the `match_msp` temperature map on held-out in-distribution
    /// inputs.
    pub fn calibrate_msp_matching(&mut self, inputs: &[Tensor]) -> Result<()> {
        let m = self.misinformer.as_ref().ok_or_else(|| Error::config("no misinformation model"))?;
        self.msp_matcher = Some(MspMatcher::fit(&self.defender, m, inputs)?);
        Ok(())
    }

    /// Computes the served answer without touching the audit counters.
    pub fn respond(&self, x: &Tensor) -> Result<Response> {
        let f = self.defender.forward(x)?;
        let y_max = msp(&f);
        let c = &self.config;
        let (probs, alpha, flagged) = match c.kind {
            DefenseKind::None => (f, 0.0, false),
            DefenseKind::Am => {
                let m = self.misinformer.as_ref().expect("checked at construction");
                let mut f_hat = m.forward(x)?;
                if c.match_msp {
                    let matcher = self
                        .msp_matcher
                        .as_ref()
                        .ok_or_else(|| Error::config("match_msp is set but no temperature map was calibrated"))?;
                    f_hat = matcher.apply(&f_hat);
                }
                let alpha = blend_coefficient(y_max, c.tau, c.nu);
                let flagged = ood_detect(&f, c.tau) == Detection::Ood;
                (am_blend(&f, &f_hat, alpha), alpha, flagged)
            }
            DefenseKind::Dp => (dp_perturb(&f, c.dp_magnitude), 0.0, false),
            DefenseKind::Pp => (mix(&f, &poison_distribution(&f), c.alpha_pp), c.alpha_pp, false),
        };
        Ok(Response { probs, msp: y_max, alpha, flagged })
    }

    /// Fraction of `user`'s queries the detector flagged as OOD.
    pub fn audit_user(&self, user: UserId) -> Result<f64> {
        self.audit.ood_fraction(user)
    }

    /// Total queries served through [`PredictionApi::query`].
    pub fn queries_served(&self) -> u64 {
        self.audit.total()
    }

    pub fn user_queries(&self, user: UserId) -> u64 {
        self.audit.user_total(user)
    }

    /// Starts keeping one [`AuditRecord`] per query.
    pub fn enable_audit_log(&mut self) {
        self.audit.enable_log();
    }

    /// Appends buffered records to a CSV file and clears the buffer.
    pub fn append_audit_csv(&self, path: &std::path::Path) -> Result<usize> {
        self.audit.append_csv(path)
    }
}

impl PredictionApi for DefendedModel {
    fn num_classes(&self) -> usize {
        self.defender.num_classes()
    }

    fn input_shape(&self) -> &[usize] {
        self.defender.input_shape()
    }

    fn query(&self, user: UserId, x: &Tensor) -> Result<Vec<f64>> {
        let r = self.respond(x)?;
        self.audit.record(user, &r);
        Ok(r.probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn msp_examples() {
        assert_abs_diff_eq!(msp(&[0.1; 10]), 0.1);
        assert_eq!(msp(&[0.0, 1.0, 0.0]), 1.0);
        assert_eq!(msp(&[0.7, 0.2, 0.1]), 0.7);
    }

    #[test]
    fn detection_is_strict() {
        assert_eq!(ood_detect(&[0.9, 0.1], 0.5), Detection::Id);
        assert_eq!(ood_detect(&[0.3, 0.3, 0.4], 0.5), Detection::Ood);
        assert_eq!(ood_detect(&[0.5, 0.5], 0.5), Detection::Ood);
    }

    #[test]
    fn blend_coefficient_examples() {
        assert_eq!(blend_coefficient(0.7, 0.7, 1000.0), 0.5);
        let direct = 1.0 / (1.0 + 10f64.exp());
        assert_abs_diff_eq!(blend_coefficient(0.61, 0.6, 1000.0), direct, epsilon = 1e-15);
        assert_abs_diff_eq!(direct, 4.54e-5, epsilon = 1e-7);
        let below = blend_coefficient(0.59, 0.6, 1000.0);
        assert_abs_diff_eq!(below, 1.0 - direct, epsilon = 1e-12);
        assert_abs_diff_eq!(below, 0.99995, epsilon = 1e-5);
        assert_eq!(blend_coefficient(1.0, 0.0, 1000.0), 0.0);
        assert_eq!(blend_coefficient(0.0, 1.0, 1000.0), 1.0);
    }

    #[test]
    fn am_blend_examples() {
        let f = [0.8, 0.2];
        let g = [0.1, 0.9];
        assert_eq!(am_blend(&f, &g, 0.0), f);
        assert_eq!(am_blend(&f, &g, 1.0), g);
        let half = am_blend(&f, &g, 0.5);
        assert_abs_diff_eq!(half[0], 0.45, epsilon = 1e-15);
        assert_abs_diff_eq!(half[1], 0.55, epsilon = 1e-15);
    }

    #[test]
    fn am_requires_misinformer() {
        let f = Arc::new(Classifier::dense_mlp(2, 4, 2, 0).unwrap());
        assert!(matches!(DefendedModel::new(f.clone(), None, DefenseConfig::am(0.5)), Err(Error::Config(_))));
        let wrong = Arc::new(Classifier::dense_mlp(2, 4, 3, 0).unwrap());
        assert!(DefendedModel::new(f, Some(wrong), DefenseConfig::am(0.5)).is_err());
    }

    #[test]
    fn config_checks_active_fields_only() {
        let mut c = DefenseConfig::pp(0.5);
        c.tau = 7.0;
        assert!(c.validate().is_ok());
        c.kind = DefenseKind::Am;
        assert!(c.validate().is_err());
        assert!(DefenseConfig::pp(1.5).validate().is_err());
        assert!(DefenseConfig::dp(-0.1).validate().is_err());
        assert!(DefenseConfig { nu: 0.0, ..DefenseConfig::am(0.5) }.validate().is_err());
    }
}
