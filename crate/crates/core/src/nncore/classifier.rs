use serde::{Deserialize, Serialize};

use super::layer::LayerSpec;
use super::loss::{softmax, Objective};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::prob::argmax;

/// Feed-forward classifier ending in a softmax.
///
/// Used in three roles: the defender's model, the misinformation model and
/// the attacker's clone. After training it is only read, so it can be shared
/// across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    params: Vec<Vec<Tensor>>,
    num_classes: usize,
}

/// Gradients laid out like `Classifier` parameters: layer, tensor, flat value.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub(crate) Vec<Vec<Vec<f64>>>);

impl Gradients {
    pub(crate) fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (ta, tb) in a.iter_mut().zip(b) {
                for (x, y) in ta.iter_mut().zip(tb) {
                    *x += scale * y;
                }
            }
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.0.iter().flatten().flatten().copied().collect()
    }
}

pub(crate) struct Trace {
    // activations[i] is the input of layer i; the last entry is the logits.
    activations: Vec<Vec<f64>>,
    pub(crate) probs: Vec<f64>,
}

impl Classifier {
    /// Builds a classifier with freshly initialized parameters.
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Result<Self> {
        let num_classes = check_architecture(&input_shape, &layers)?;
        let params = layers.iter().map(LayerSpec::init_params).collect();
        Ok(Classifier { input_shape, layers, params, num_classes })
    }

    pub(crate) fn from_parts(
        input_shape: Vec<usize>,
        layers: Vec<LayerSpec>,
        params: Vec<Vec<Tensor>>,
    ) -> Result<Self> {
        let num_classes = check_architecture(&input_shape, &layers)?;
        for (spec, given) in layers.iter().zip(&params) {
            let expected = spec.init_params();
            let ok = expected.len() == given.len() && expected.iter().zip(given).all(|(e, g)| e.shape() == g.shape());
            if !ok {
                return Err(Error::dim(format!("parameter shapes do not match {spec:?}")));
            }
        }
        if params.len() != layers.len() {
            return Err(Error::dim("one parameter block per layer required"));
        }
        Ok(Classifier { input_shape, layers, params, num_classes })
    }

    /// `input -> hidden -> num_classes` with a ReLU in between.
    pub fn dense_mlp(input_dim: usize, hidden: usize, num_classes: usize, seed: u64) -> Result<Self> {
        Classifier::new(
            vec![input_dim],
            vec![
                LayerSpec::Dense { inputs: input_dim, outputs: hidden, init_seed: seed },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: hidden, outputs: num_classes, init_seed: seed.wrapping_add(1) },
                LayerSpec::SoftmaxOutput,
            ],
        )
    }

    /// One convolution, ReLU, then a dense layer to the classes. Takes
    /// `[height, width]` single-channel images.
    pub fn small_conv(
        height: usize,
        width: usize,
        channels: usize,
        kernel: usize,
        num_classes: usize,
        seed: u64,
    ) -> Result<Self> {
        let flat = channels * (height + 1 - kernel) * (width + 1 - kernel);
        Classifier::new(
            vec![height, width],
            vec![
                LayerSpec::Conv2dSmall {
                    in_channels: 1,
                    out_channels: channels,
                    kernel,
                    height,
                    width,
                    init_seed: seed,
                },
                LayerSpec::Relu,
                LayerSpec::Flatten,
                LayerSpec::Dense { inputs: flat, outputs: num_classes, init_seed: seed.wrapping_add(1) },
                LayerSpec::SoftmaxOutput,
            ],
        )
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[Vec<Tensor>] {
        &self.params
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().flatten().map(Tensor::len).sum()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.input_shape.as_slice() {
            return Err(Error::dim(format!("model expects input {:?}, got {:?}", self.input_shape, x.shape())));
        }
        Ok(())
    }

    /// Probability vector over the classes.
    pub fn forward(&self, x: &Tensor) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.trace(x.data()).probs)
    }

    pub fn logits(&self, x: &Tensor) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut t = self.trace(x.data());
        Ok(t.activations.pop().unwrap_or_default())
    }

    pub fn predict(&self, x: &Tensor) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    pub(crate) fn trace(&self, x: &[f64]) -> Trace {
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        // The softmax is applied outside the loop so the logits stay cached.
        let body = self.layers.len() - 1;
        for (spec, params) in self.layers[..body].iter().zip(&self.params) {
            let next = spec.forward(params, &cur);
            activations.push(cur);
            cur = next;
        }
        let probs = softmax(&cur);
        activations.push(cur);
        Trace { activations, probs }
    }

    pub(crate) fn zero_grads(&self) -> Gradients {
        Gradients(self.params.iter().map(|ts| ts.iter().map(|t| vec![0.0; t.len()]).collect()).collect())
    }

    /// Backpropagates `logit_grad` through the body; returns the input gradient.
    pub(crate) fn backward(&self, trace: &Trace, logit_grad: &[f64], grads: &mut Gradients) -> Vec<f64> {
        let mut upstream = logit_grad.to_vec();
        let body = self.layers.len() - 1;
        for i in (0..body).rev() {
            upstream = self.layers[i].backward(&self.params[i], &trace.activations[i], &upstream, &mut grads.0[i]);
        }
        upstream
    }

    /// Loss of one example and its parameter gradient.
    pub fn loss_and_grad(&self, x: &Tensor, objective: &Objective) -> Result<(f64, Gradients)> {
        self.check_input(x)?;
        objective.validate(self.num_classes)?;
        let trace = self.trace(x.data());
        let mut grads = self.zero_grads();
        self.backward(&trace, &objective.logit_grad(&trace.probs), &mut grads);
        Ok((objective.loss(&trace.probs), grads))
    }

    /// Gradient of the loss with respect to the input.
    pub fn input_grad(&self, x: &Tensor, objective: &Objective) -> Result<Vec<f64>> {
        self.check_input(x)?;
        objective.validate(self.num_classes)?;
        let trace = self.trace(x.data());
        let mut grads = self.zero_grads();
        Ok(self.backward(&trace, &objective.logit_grad(&trace.probs), &mut grads))
    }

    /// `params -= lr * grads`.
    pub(crate) fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        for (ps, gs) in self.params.iter_mut().zip(&grads.0) {
            for (p, g) in ps.iter_mut().zip(gs) {
                for (v, d) in p.data_mut().iter_mut().zip(g) {
                    *v -= lr * d;
                }
            }
        }
    }

    pub(crate) fn param_locations(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.num_params());
        for (l, ts) in self.params.iter().enumerate() {
            for (t, tensor) in ts.iter().enumerate() {
                out.extend((0..tensor.len()).map(|i| (l, t, i)));
            }
        }
        out
    }

    pub(crate) fn param_mut(&mut self, (l, t, i): (usize, usize, usize)) -> &mut f64 {
        &mut self.params[l][t].data_mut()[i]
    }

    pub fn params_are_finite(&self) -> bool {
        self.params.iter().flatten().all(|t| t.data().iter().all(|v| v.is_finite()))
    }
}

fn check_architecture(input_shape: &[usize], layers: &[LayerSpec]) -> Result<usize> {
    if input_shape.is_empty() || input_shape.contains(&0) {
        return Err(Error::dim(format!("bad input shape {input_shape:?}")));
    }
    match layers.last() {
        Some(LayerSpec::SoftmaxOutput) => {}
        _ => return Err(Error::config("the last layer must be softmax-output")),
    }
    if layers[..layers.len() - 1].contains(&LayerSpec::SoftmaxOutput) {
        return Err(Error::config("softmax-output may only appear last"));
    }
    let mut shape = input_shape.to_vec();
    for spec in layers {
        shape = spec.output_shape(&shape)?;
    }
    let k = shape[0];
    if k < 2 {
        return Err(Error::config(format!("need at least 2 classes, got {k}")));
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::is_distribution;

    #[test]
    fn fresh_two_class_model_is_near_even() {
        let m = Classifier::dense_mlp(4, 64, 2, 11).unwrap();
        let x = Tensor::vector(vec![0.1, -0.2, 0.05, 0.3]).unwrap();
        let p = m.forward(&x).unwrap();
        assert!(is_distribution(&p));
        assert!((p[0] - 0.5).abs() < 0.15, "{p:?}");
    }

    #[test]
    fn shape_mismatch_is_a_dimension_error() {
        let m = Classifier::dense_mlp(4, 8, 3, 0).unwrap();
        let x = Tensor::vector(vec![0.0; 5]).unwrap();
        assert!(matches!(m.forward(&x), Err(Error::Dimension(_))));
    }

    #[test]
    fn architecture_must_compose() {
        let bad = Classifier::new(
            vec![4],
            vec![
                LayerSpec::Dense { inputs: 4, outputs: 8, init_seed: 0 },
                LayerSpec::Dense { inputs: 7, outputs: 2, init_seed: 1 },
                LayerSpec::SoftmaxOutput,
            ],
        );
        assert!(bad.is_err());
        let no_softmax = Classifier::new(vec![4], vec![LayerSpec::Dense { inputs: 4, outputs: 2, init_seed: 0 }]);
        assert!(no_softmax.is_err());
        let one_class = Classifier::dense_mlp(4, 8, 1, 0);
        assert!(one_class.is_err());
    }

    #[test]
    fn conv_net_outputs_distribution() {
        let m = Classifier::small_conv(8, 8, 3, 3, 4, 5).unwrap();
        let x = Tensor::new(vec![8, 8], (0..64).map(|i| (i % 7) as f64 / 7.0).collect()).unwrap();
        assert!(is_distribution(&m.forward(&x).unwrap()));
    }
}
