//! Dataset file format (`.amd`), little-endian:
//!
//! ```text
//! magic        8 bytes  "AMLBDATA"
//! version      u32      1
//! provenance   u8 flag, then (if 1) u32 length + UTF-8 JSON
//! role         u8       0 defender-train, 1 defender-test, 2 outlier, 3 surrogate, 4 seed
//! name         u32 length + UTF-8
//! num_classes  u32
//! count        u32      N
//! input rank   u32 r, then r x u32 dims
//! labels       N x u32
//! inputs       N x prod(dims) x f64
//! targets      u8 flag, then (if 1) N x num_classes x f64
//! ```
//!
//! Harvested query/response sets use the same layout with the provenance
//! header and the served probability vectors in `targets`.

use std::path::Path;

use super::{LabeledDataset, Role};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::nncore::Tensor;

const MAGIC: &[u8; 8] = b"AMLBDATA";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub dataset: LabeledDataset,
    pub targets: Option<Vec<Vec<f64>>>,
    pub provenance: Option<String>,
}

pub fn encode_dataset(file: &DatasetFile) -> Result<Vec<u8>> {
    let d = &file.dataset;
    let mut w = Writer::new(MAGIC, VERSION);
    match &file.provenance {
        Some(p) => {
            w.u8(1);
            w.str(p);
        }
        None => w.u8(0),
    }
    w.u8(d.role().code());
    w.str(d.name());
    w.usize32(d.num_classes());
    w.usize32(d.len());
    let shape = d.input_shape().unwrap_or(&[]);
    w.usize32(shape.len());
    for &s in shape {
        w.usize32(s);
    }
    for &y in d.labels() {
        w.usize32(y);
    }
    for x in d.inputs() {
        w.f64s(x.data());
    }
    match &file.targets {
        Some(ts) => {
            if ts.len() != d.len() || ts.iter().any(|t| t.len() != d.num_classes()) {
                return Err(Error::dim("one target of num_classes entries per example required"));
            }
            w.u8(1);
            for t in ts {
                w.f64s(t);
            }
        }
        None => w.u8(0),
    }
    Ok(w.finish())
}

pub fn decode_dataset(bytes: &[u8]) -> Result<DatasetFile> {
    let (mut r, version) = Reader::open(bytes, MAGIC)?;
    if version != VERSION {
        return Err(r.err(format!("unsupported dataset version {version}")));
    }
    let provenance = match r.u8()? {
        0 => None,
        _ => Some(r.str()?),
    };
    let at = r.offset();
    let role = Role::from_code(r.u8()?).ok_or(Error::Format { offset: at, message: "unknown role".into() })?;
    let name = r.str()?;
    let num_classes = r.usize32()?;
    let count = r.usize32()?;
    let rank = r.usize32()?;
    let shape = (0..rank).map(|_| r.usize32()).collect::<Result<Vec<_>>>()?;
    let labels = (0..count).map(|_| r.usize32()).collect::<Result<Vec<_>>>()?;
    let per: usize = shape.iter().product();
    let mut inputs = Vec::with_capacity(count);
    for _ in 0..count {
        let at = r.offset();
        let data = r.f64s(per)?;
        inputs
            .push(Tensor::new(shape.clone(), data).map_err(|e| Error::Format { offset: at, message: e.to_string() })?);
    }
    let targets = match r.u8()? {
        0 => None,
        _ => Some((0..count).map(|_| r.f64s(num_classes)).collect::<Result<Vec<_>>>()?),
    };
    r.finish()?;
    let dataset = LabeledDataset::new(name, role, num_classes, inputs, labels)?;
    Ok(DatasetFile { dataset, targets, provenance })
}

pub fn save_dataset(file: &DatasetFile, path: &Path) -> Result<()> {
    std::fs::write(path, encode_dataset(file)?)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<DatasetFile> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    decode_dataset(&bytes)
}
