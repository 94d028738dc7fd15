//! Model file format (`.amm`), all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes   "AMLBMODL"
//! version      u32       1
//! input rank   u32       r
//! input dims   r x u32
//! layer count  u32       L
//! per layer:
//!   tag        u8        1 dense, 2 relu, 3 conv2d-small, 4 flatten, 5 softmax-output
//!   dense:     inputs u32, outputs u32, init_seed u64
//!   conv:      in_channels u32, out_channels u32, kernel u32, height u32, width u32, init_seed u64
//!   params:    for each parameter tensor (weights then bias): n u32, n x f64
//! ```
//!
//! Parameter shapes are implied by the layer dimensions.

use std::path::Path;

use super::classifier::Classifier;
use super::layer::LayerSpec;
use super::tensor::Tensor;
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"AMLBMODL";
const VERSION: u32 = 1;

pub fn encode_model(model: &Classifier) -> Vec<u8> {
    let mut w = Writer::new(MAGIC, VERSION);
    w.usize32(model.input_shape().len());
    for &d in model.input_shape() {
        w.usize32(d);
    }
    w.usize32(model.layers().len());
    for (spec, params) in model.layers().iter().zip(model.params()) {
        w.u8(spec.tag());
        match *spec {
            LayerSpec::Dense { inputs, outputs, init_seed } => {
                w.usize32(inputs);
                w.usize32(outputs);
                w.u64(init_seed);
            }
            LayerSpec::Conv2dSmall { in_channels, out_channels, kernel, height, width, init_seed } => {
                for d in [in_channels, out_channels, kernel, height, width] {
                    w.usize32(d);
                }
                w.u64(init_seed);
            }
            _ => {}
        }
        for t in params {
            w.usize32(t.len());
            w.f64s(t.data());
        }
    }
    w.finish()
}

pub fn decode_model(bytes: &[u8]) -> Result<Classifier> {
    let (mut r, version) = Reader::open(bytes, MAGIC)?;
    if version != VERSION {
        return Err(r.err(format!("unsupported model version {version}")));
    }
    let rank = r.usize32()?;
    let input_shape = (0..rank).map(|_| r.usize32()).collect::<Result<Vec<_>>>()?;
    let count = r.usize32()?;
    let mut layers = Vec::with_capacity(count);
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let at = r.offset();
        let spec = match r.u8()? {
            1 => LayerSpec::Dense { inputs: r.usize32()?, outputs: r.usize32()?, init_seed: r.u64()? },
            2 => LayerSpec::Relu,
            3 => LayerSpec::Conv2dSmall {
                in_channels: r.usize32()?,
                out_channels: r.usize32()?,
                kernel: r.usize32()?,
                height: r.usize32()?,
                width: r.usize32()?,
                init_seed: r.u64()?,
            },
            4 => LayerSpec::Flatten,
            5 => LayerSpec::SoftmaxOutput,
            t => return Err(Error::Format { offset: at, message: format!("unknown layer tag {t}") }),
        };
        let shapes: Vec<Vec<usize>> = spec.init_params().iter().map(|t| t.shape().to_vec()).collect();
        let mut block = Vec::with_capacity(shapes.len());
        for shape in shapes {
            let n = r.usize32()?;
            if n != shape.iter().product::<usize>() {
                return Err(r.err(format!("parameter count {n} does not fit shape {shape:?}")));
            }
            let at = r.offset();
            let data = r.f64s(n)?;
            block.push(Tensor::new(shape, data).map_err(|e| Error::Format { offset: at, message: e.to_string() })?);
        }
        layers.push(spec);
        params.push(block);
    }
    r.finish()?;
    Classifier::from_parts(input_shape, layers, params)
}

pub fn save_model(model: &Classifier, path: &Path) -> Result<()> {
    std::fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Classifier> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    decode_model(&bytes)
}
