//! Writes a two-image IDX pair, loads it back, and trains briefly on a
//! synthetic set exported in the same format.
//!
//! ```text
//! cargo run --release --example idx_dataset
//! ```

use std::fs;
use std::path::Path;

use trp_core::data::{generate_synthetic, load_idx, Dataset, SyntheticConfig, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
use trp_core::net::NetworkModel;
use trp_core::trp::{train, TrpConfig};

fn write_idx(ds: &Dataset, images: &Path, labels: &Path) -> std::io::Result<()> {
    let (_, h, w) = ds.shape();
    let mut img = Vec::new();
    for v in [IDX_IMAGES_MAGIC, ds.len() as u32, h as u32, w as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend(ds.images().iter().map(|&p| (p * 255.0).round() as u8));
    let mut lab = Vec::new();
    lab.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    lab.extend(ds.labels().iter().map(|&l| l as u8));
    fs::write(images, img)?;
    fs::write(labels, lab)
}

fn main() -> trp_core::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let (images, labels) = (dir.path().join("images.idx"), dir.path().join("labels.idx"));

    let tiny = Dataset::new((1, 2, 2), vec![0.0, 1.0, 0.2, 0.4, 1.0, 0.0, 0.0, 1.0], vec![1, 0], 2)?;
    write_idx(&tiny, &images, &labels).expect("write idx");
    let back = load_idx(&images, &labels)?;
    println!("2x2 pair: labels {:?}, first image {:?}", back.labels(), back.image(0));

    let synth = generate_synthetic(3, &SyntheticConfig::default())?;
    write_idx(&synth, &images, &labels).expect("write idx");
    let data = load_idx(&images, &labels)?.split(0.25)?;
    println!("loaded {} train / {} test images of {:?}", data.train.len(), data.test.len(), data.train.shape());

    let cfg = TrpConfig { epochs: 5, batch_size: 30, ..TrpConfig::default() };
    let model = NetworkModel::tiny_conv_net(data.train.shape(), data.train.class_count(), 0)?;
    let out = train(model, &data, &cfg)?;
    for m in &out.history {
        println!("epoch {}: loss {:.4}, test accuracy {:.4}", m.epoch, m.train_loss, m.test_acc);
    }
    Ok(())
}
