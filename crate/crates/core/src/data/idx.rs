//! IDX files as used by MNIST-style datasets: big-endian headers, one
//! unsigned byte per pixel or label.

use std::path::Path;

use super::{LabeledDataset, Role};
use crate::error::{Error, Result};
use crate::nncore::Tensor;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or(Error::Format { offset: offset as u64, message: "truncated header".into() })
}

fn body(bytes: &[u8], offset: usize, len: usize) -> Result<&[u8]> {
    bytes.get(offset..offset + len).ok_or(Error::Format {
        offset: bytes.len() as u64,
        message: format!("truncated data: expected {len} bytes from offset {offset}"),
    })
}

/// Loads an image/label pair. Pixels are scaled to `[0, 1]` by `/ 255`;
/// each image becomes a `[rows, cols]` tensor.
pub fn load_idx_images(
    images_path: &Path,
    labels_path: &Path,
    role: Role,
    num_classes: usize,
) -> Result<LabeledDataset> {
    let images = read(images_path)?;
    let labels = read(labels_path)?;

    let magic = be_u32(&images, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format { offset: 0, message: format!("bad image magic {magic:#010x}") });
    }
    let count = be_u32(&images, 4)? as usize;
    let rows = be_u32(&images, 8)? as usize;
    let cols = be_u32(&images, 12)? as usize;
    let pixels = body(&images, 16, count * rows * cols)?;
    if images.len() != 16 + pixels.len() {
        return Err(Error::Format { offset: (16 + pixels.len()) as u64, message: "trailing image bytes".into() });
    }

    let magic = be_u32(&labels, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format { offset: 0, message: format!("bad label magic {magic:#010x}") });
    }
    let label_count = be_u32(&labels, 4)? as usize;
    if label_count != count {
        return Err(Error::Format { offset: 4, message: format!("{count} images but {label_count} labels") });
    }
    let label_bytes = body(&labels, 8, count)?;

    let inputs = pixels
        .chunks_exact((rows * cols).max(1))
        .take(count)
        .map(|img| Tensor::new(vec![rows, cols], img.iter().map(|&p| f64::from(p) / 255.0).collect()))
        .collect::<Result<Vec<_>>>()?;
    let name = images_path.file_stem().and_then(|s| s.to_str()).unwrap_or("idx").to_string();
    LabeledDataset::new(name, role, num_classes, inputs, label_bytes.iter().map(|&b| b as usize).collect())
}

pub fn write_idx_images(path: &Path, images: &[Vec<u8>], rows: usize, cols: usize) -> Result<()> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IMAGES_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        if img.len() != rows * cols {
            return Err(Error::dim(format!("image has {} pixels, expected {}", img.len(), rows * cols)));
        }
        out.extend_from_slice(img);
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes a `[rows, cols]` dataset back out, quantizing pixels to bytes.
pub fn save_idx(dataset: &LabeledDataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let shape = dataset.input_shape().ok_or_else(|| Error::config("cannot write an empty dataset"))?;
    let [rows, cols] = shape else {
        return Err(Error::dim(format!("IDX images must be 2-D, got {shape:?}")));
    };
    let images: Vec<Vec<u8>> = dataset
        .inputs()
        .iter()
        .map(|t| t.data().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect())
        .collect();
    let labels = dataset
        .labels()
        .iter()
        .map(|&y| u8::try_from(y).map_err(|_| Error::config("IDX labels must fit in a byte")))
        .collect::<Result<Vec<u8>>>()?;
    write_idx_images(images_path, &images, *rows, *cols)?;
    write_idx_labels(labels_path, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(dir: &Path, n: usize) -> (std::path::PathBuf, std::path::PathBuf) {
        let images: Vec<Vec<u8>> = (0..n).map(|i| (0..28 * 28).map(|p| ((p + i * 7) % 256) as u8).collect()).collect();
        let ip = dir.join("img.idx");
        let lp = dir.join("lbl.idx");
        write_idx_images(&ip, &images, 28, 28).unwrap();
        write_idx_labels(&lp, &(0..n as u8).collect::<Vec<_>>()).unwrap();
        (ip, lp)
    }

    #[test]
    fn loads_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = fixture(dir.path(), 3);
        let d = load_idx_images(&ip, &lp, Role::DefenderTrain, 10).unwrap();
        assert_eq!(d.len(), 3);
        assert!(d.inputs().iter().all(|t| t.shape() == [28, 28]));
        assert_eq!(d.labels(), &[0, 1, 2]);
        // pixel 255 sits at flat index 255 of the first image
        assert_eq!(d.inputs()[0].data()[255], 1.0);
        assert_eq!(d.inputs()[0].data()[0], 0.0);
    }

    #[test]
    fn round_trip_through_save() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = fixture(dir.path(), 4);
        let d = load_idx_images(&ip, &lp, Role::DefenderTrain, 10).unwrap();
        let (ip2, lp2) = (dir.path().join("a"), dir.path().join("b"));
        save_idx(&d, &ip2, &lp2).unwrap();
        assert_eq!(std::fs::read(&ip).unwrap(), std::fs::read(&ip2).unwrap());
        let back = load_idx_images(&ip2, &lp2, Role::DefenderTrain, 10).unwrap();
        assert_eq!(back.inputs(), d.inputs());
    }

    #[test]
    fn count_mismatch_and_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, _) = fixture(dir.path(), 3);
        let lp = dir.path().join("short.idx");
        write_idx_labels(&lp, &[1, 2]).unwrap();
        assert!(matches!(load_idx_images(&ip, &lp, Role::DefenderTrain, 10), Err(Error::Format { offset: 4, .. })));
        assert!(matches!(load_idx_images(&lp, &lp, Role::DefenderTrain, 10), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn truncated_images_report_offset() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = fixture(dir.path(), 3);
        let bytes = std::fs::read(&ip).unwrap();
        std::fs::write(&ip, &bytes[..bytes.len() - 10]).unwrap();
        match load_idx_images(&ip, &lp, Role::DefenderTrain, 10) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, (bytes.len() - 10) as u64),
            other => panic!("{other:?}"),
        }
    }
}
