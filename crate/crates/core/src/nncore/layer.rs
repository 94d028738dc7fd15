use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::rng;

/// One stage of a feed-forward classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
        init_seed: u64,
    },
    Relu,
    /// Valid (unpadded) stride-1 convolution over a `[channels, height, width]` input.
    Conv2dSmall {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        height: usize,
        width: usize,
        init_seed: u64,
    },
    Flatten,
    SoftmaxOutput,
}

impl LayerSpec {
    pub(crate) fn tag(&self) -> u8 {
        match self {
            LayerSpec::Dense { .. } => 1,
            LayerSpec::Relu => 2,
            LayerSpec::Conv2dSmall { .. } => 3,
            LayerSpec::Flatten => 4,
            LayerSpec::SoftmaxOutput => 5,
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |want: String| Err(Error::dim(format!("{self:?} expects input {want}, got {input:?}")));
        match *self {
            LayerSpec::Dense { inputs, outputs, .. } => {
                if input != [inputs] {
                    return mismatch(format!("[{inputs}]"));
                }
                Ok(vec![outputs])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Conv2dSmall { in_channels, out_channels, kernel, height, width, .. } => {
                let flat_ok = in_channels == 1 && input == [height, width];
                if !flat_ok && input != [in_channels, height, width] {
                    return mismatch(format!("[{in_channels}, {height}, {width}]"));
                }
                if kernel == 0 || kernel > height || kernel > width {
                    return Err(Error::dim(format!("kernel {kernel} does not fit {height}x{width}")));
                }
                Ok(vec![out_channels, height - kernel + 1, width - kernel + 1])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::SoftmaxOutput => {
                if input.len() != 1 {
                    return mismatch("a flat vector".into());
                }
                Ok(input.to_vec())
            }
        }
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` weights and biases.
    pub(crate) fn init_params(&self) -> Vec<Tensor> {
        let (wshape, bshape, fan_in, seed) = match *self {
            LayerSpec::Dense { inputs, outputs, init_seed } => {
                (vec![outputs, inputs], vec![outputs], inputs, init_seed)
            }
            LayerSpec::Conv2dSmall { in_channels, out_channels, kernel, init_seed, .. } => (
                vec![out_channels, in_channels, kernel, kernel],
                vec![out_channels],
                in_channels * kernel * kernel,
                init_seed,
            ),
            _ => return Vec::new(),
        };
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut r = rng(seed);
        let mut draw = |shape: Vec<usize>| {
            let mut t = Tensor::zeros(shape);
            for v in t.data_mut() {
                *v = r.random_range(-bound..=bound);
            }
            t
        };
        let w = draw(wshape);
        let b = draw(bshape);
        vec![w, b]
    }

    pub(crate) fn forward(&self, params: &[Tensor], x: &[f64]) -> Vec<f64> {
        match *self {
            LayerSpec::Dense { inputs, outputs, .. } => {
                let (w, b) = (params[0].data(), params[1].data());
                (0..outputs)
                    .map(|o| {
                        let row = &w[o * inputs..(o + 1) * inputs];
                        b[o] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>()
                    })
                    .collect()
            }
            LayerSpec::Relu => x.iter().map(|&v| v.max(0.0)).collect(),
            LayerSpec::Conv2dSmall { in_channels, out_channels, kernel, height, width, .. } => {
                let (w, b) = (params[0].data(), params[1].data());
                let (oh, ow) = (height - kernel + 1, width - kernel + 1);
                let mut out = vec![0.0; out_channels * oh * ow];
                for oc in 0..out_channels {
                    for r in 0..oh {
                        for c in 0..ow {
                            let mut acc = b[oc];
                            for ic in 0..in_channels {
                                for kr in 0..kernel {
                                    let wrow = ((oc * in_channels + ic) * kernel + kr) * kernel;
                                    let xrow = (ic * height + r + kr) * width + c;
                                    for kc in 0..kernel {
                                        acc += w[wrow + kc] * x[xrow + kc];
                                    }
                                }
                            }
                            out[(oc * oh + r) * ow + c] = acc;
                        }
                    }
                }
                out
            }
            LayerSpec::Flatten | LayerSpec::SoftmaxOutput => x.to_vec(),
        }
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to this layer's input.
    pub(crate) fn backward(&self, params: &[Tensor], x: &[f64], upstream: &[f64], grads: &mut [Vec<f64>]) -> Vec<f64> {
        match *self {
            LayerSpec::Dense { inputs, outputs, .. } => {
                let w = params[0].data();
                let mut dx = vec![0.0; inputs];
                let (gw, gb) = split_pair(grads);
                for o in 0..outputs {
                    let g = upstream[o];
                    if g == 0.0 {
                        continue;
                    }
                    gb[o] += g;
                    let row = o * inputs;
                    for i in 0..inputs {
                        gw[row + i] += g * x[i];
                        dx[i] += w[row + i] * g;
                    }
                }
                dx
            }
            LayerSpec::Relu => x.iter().zip(upstream).map(|(&v, &g)| if v > 0.0 { g } else { 0.0 }).collect(),
            LayerSpec::Conv2dSmall { in_channels, out_channels, kernel, height, width, .. } => {
                let w = params[0].data();
                let (oh, ow) = (height - kernel + 1, width - kernel + 1);
                let mut dx = vec![0.0; in_channels * height * width];
                let (gw, gb) = split_pair(grads);
                for oc in 0..out_channels {
                    for r in 0..oh {
                        for c in 0..ow {
                            let g = upstream[(oc * oh + r) * ow + c];
                            if g == 0.0 {
                                continue;
                            }
                            gb[oc] += g;
                            for ic in 0..in_channels {
                                for kr in 0..kernel {
                                    let wrow = ((oc * in_channels + ic) * kernel + kr) * kernel;
                                    let xrow = (ic * height + r + kr) * width + c;
                                    for kc in 0..kernel {
                                        gw[wrow + kc] += g * x[xrow + kc];
                                        dx[xrow + kc] += w[wrow + kc] * g;
                                    }
                                }
                            }
                        }
                    }
                }
                dx
            }
            LayerSpec::Flatten | LayerSpec::SoftmaxOutput => upstream.to_vec(),
        }
    }
}

fn split_pair(grads: &mut [Vec<f64>]) -> (&mut [f64], &mut [f64]) {
    let (w, b) = grads.split_at_mut(1);
    (&mut w[0], &mut b[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_matches_hand_computation() {
        let spec =
            LayerSpec::Conv2dSmall { in_channels: 1, out_channels: 1, kernel: 2, height: 3, width: 3, init_seed: 0 };
        let params =
            vec![Tensor::new(vec![1, 1, 2, 2], vec![1.0, 0.0, 0.0, -1.0]).unwrap(), Tensor::vector(vec![0.5]).unwrap()];
        let x: Vec<f64> = (1..=9).map(f64::from).collect();
        // x[r][c] - x[r+1][c+1] = -4 everywhere, plus bias
        assert_eq!(spec.forward(&params, &x), vec![-3.5; 4]);
        assert_eq!(spec.output_shape(&[1, 3, 3]).unwrap(), vec![1, 2, 2]);
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let spec = LayerSpec::Dense { inputs: 16, outputs: 8, init_seed: 3 };
        let a = spec.init_params();
        assert_eq!(a, spec.init_params());
        assert!(a[0].data().iter().all(|v| v.abs() <= 0.25));
    }
}
