//! IDX image/label files: big-endian u32 magic and dimensions, then unsigned bytes.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Loads an image file (`count x rows x cols` bytes) and its label file.
/// Pixels are scaled to `[0, 1]`; the class count is `max(label) + 1`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let img = read(images_path)?;
    let lab = read(labels_path)?;

    check_magic(images_path, &img, IDX_IMAGES_MAGIC)?;
    check_magic(labels_path, &lab, IDX_LABELS_MAGIC)?;

    let count = be_u32(images_path, &img, 4)? as usize;
    let rows = be_u32(images_path, &img, 8)? as usize;
    let cols = be_u32(images_path, &img, 12)? as usize;
    let label_count = be_u32(labels_path, &lab, 4)? as usize;

    let pixels = count * rows * cols;
    expect_len(images_path, &img, 16 + pixels)?;
    expect_len(labels_path, &lab, 8 + label_count)?;
    if count != label_count {
        return Err(Error::IdxCountMismatch {
            images: count,
            labels: label_count,
        });
    }
    if count == 0 {
        return Err(Error::EmptyDataset);
    }

    let images = img[16..16 + pixels].iter().map(|&b| f64::from(b) / 255.0).collect();
    let labels: Vec<usize> = lab[8..8 + count].iter().map(|&b| b as usize).collect();
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    Dataset::new((1, rows, cols), images, labels, classes)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(format!("reading IDX file {}", path.display()), e))
}

fn be_u32(path: &Path, bytes: &[u8], at: usize) -> Result<u32> {
    expect_len(path, bytes, at + 4)?;
    Ok(u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes")))
}

fn expect_len(path: &Path, bytes: &[u8], needed: usize) -> Result<()> {
    if bytes.len() < needed {
        return Err(Error::IdxTruncated {
            path: path.to_path_buf(),
            expected: needed,
            actual: bytes.len(),
        });
    }
    Ok(())
}

fn check_magic(path: &Path, bytes: &[u8], expected: u32) -> Result<()> {
    let found = be_u32(path, bytes, 0)?;
    if found != expected {
        return Err(Error::IdxMagic {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    Ok(())
}
