//! Central finite-difference verification of the analytic backward pass.

use super::classifier::Classifier;
use super::loss::Objective;
use super::tensor::Tensor;
use crate::error::Result;

pub const FD_STEP: f64 = 1e-5;

/// One weighted term of a composite loss, e.g. an in-distribution example
/// plus an outlier pushed towards uniform.
#[derive(Debug, Clone)]
pub struct LossTerm {
    pub input: Tensor,
    pub objective: Objective,
    pub weight: f64,
}

impl LossTerm {
    pub fn new(input: Tensor, objective: Objective) -> Self {
        LossTerm { input, objective, weight: 1.0 }
    }

    pub fn weighted(input: Tensor, objective: Objective, weight: f64) -> Self {
        LossTerm { input, objective, weight }
    }
}

fn total_loss(model: &Classifier, terms: &[LossTerm]) -> Result<f64> {
    let mut sum = 0.0;
    for t in terms {
        sum += t.weight * t.objective.loss(&model.forward(&t.input)?);
    }
    Ok(sum)
}

/// Max over parameters of `|analytic - numeric| / (|numeric| + 1e-8)`.
pub fn gradient_check(model: &Classifier, terms: &[LossTerm]) -> Result<f64> {
    let mut analytic = model.zero_grads();
    for t in terms {
        let (_, g) = model.loss_and_grad(&t.input, &t.objective)?;
        analytic.add_scaled(&g, t.weight);
    }
    let analytic = analytic.flat();

    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (k, loc) in model.param_locations().into_iter().enumerate() {
        let orig = *probe.param_mut(loc);
        *probe.param_mut(loc) = orig + FD_STEP;
        let up = total_loss(&probe, terms)?;
        *probe.param_mut(loc) = orig - FD_STEP;
        let down = total_loss(&probe, terms)?;
        *probe.param_mut(loc) = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        worst = worst.max((analytic[k] - numeric).abs() / (numeric.abs() + 1e-8));
    }
    Ok(worst)
}

/// Same check for the gradient with respect to the input.
pub fn input_gradient_check(model: &Classifier, x: &Tensor, objective: &Objective) -> Result<f64> {
    let analytic = model.input_grad(x, objective)?;
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let mut up = x.clone();
        up.data_mut()[i] += FD_STEP;
        let mut down = x.clone();
        down.data_mut()[i] -= FD_STEP;
        let numeric = (objective.loss(&model.forward(&up)?) - objective.loss(&model.forward(&down)?)) / (2.0 * FD_STEP);
        worst = worst.max((a - numeric).abs() / (numeric.abs() + 1e-8));
    }
    Ok(worst)
}
