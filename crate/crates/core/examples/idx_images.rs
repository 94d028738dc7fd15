//! IDX image ingestion: writes a small two-class image set in the MNIST file
//! format, reads it back and trains the convolutional classifier on it.

use amlab::data::{load_idx_images, write_idx_images, write_idx_labels, Role};
use amlab::eval::accuracy;
use amlab::nncore::{train, Classifier, LossKind, TrainConfig};

fn main() -> amlab::Result<()> {
    let dir = std::env::temp_dir().join("amlab-idx-example");
    std::fs::create_dir_all(&dir)?;
    // Class 0 is a vertical bar, class 1 a horizontal bar, at varying offsets.
    let (rows, cols) = (12, 12);
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for i in 0..200usize {
        let class = i % 2;
        let offset = 2 + (i / 2) % 8;
        let img: Vec<u8> = (0..rows * cols)
            .map(|p| {
                let (r, c) = (p / cols, p % cols);
                let on = if class == 0 { c == offset } else { r == offset };
                if on {
                    255
                } else {
                    (p * 37 % 23) as u8
                }
            })
            .collect();
        images.push(img);
        labels.push(class as u8);
    }
    let (img_path, lbl_path) = (dir.join("images.idx"), dir.join("labels.idx"));
    write_idx_images(&img_path, &images, rows, cols)?;
    write_idx_labels(&lbl_path, &labels)?;

    let data = load_idx_images(&img_path, &lbl_path, Role::DefenderTrain, 2)?;
    println!("loaded {} images of shape {:?}", data.len(), data.input_shape().unwrap());
    let mut model = Classifier::small_conv(rows, cols, 4, 5, 2, 3)?;
    let cfg = TrainConfig { epochs: 20, oe_weight: 0.0, ..TrainConfig::default() };
    let report = train(&mut model, &data, None, &cfg, LossKind::Standard)?;
    println!("final epoch loss {:.4}", report.loss_history.last().unwrap());
    println!("training accuracy {:.3}", accuracy(&model, &data)?);
    Ok(())
}
