//! Desk-scale datasets.

mod idx;
mod synthetic;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use idx::{load_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use synthetic::{generate_synthetic, nearest_centroid_accuracy, SyntheticConfig};

use crate::error::{Error, Result};
use crate::net::{Batch, Shape3};

/// Immutable set of equally shaped images with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    shape: Shape3,
    images: Vec<f64>,
    labels: Vec<usize>,
    class_count: usize,
}

impl Dataset {
    pub fn new(shape: Shape3, images: Vec<f64>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let per = shape.0 * shape.1 * shape.2;
        if per == 0 {
            return Err(Error::Shape(format!("degenerate image shape {shape:?}")));
        }
        if images.len() != per * labels.len() {
            return Err(Error::Shape(format!(
                "{} labels need {} pixels, got {}",
                labels.len(),
                per * labels.len(),
                images.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::Shape(format!("label {bad} >= class count {class_count}")));
        }
        if images.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("dataset pixels".into()));
        }
        Ok(Self {
            shape,
            images,
            labels,
            class_count,
        })
    }

    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn images(&self) -> &[f64] {
        &self.images
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let per = self.shape.0 * self.shape.1 * self.shape.2;
        &self.images[i * per..(i + 1) * per]
    }

    /// Gathers the given samples into a batch.
    pub fn batch(&self, indices: &[usize]) -> Result<Batch> {
        let mut inputs = Vec::with_capacity(indices.len() * self.image(0).len());
        for &i in indices {
            inputs.extend_from_slice(self.image(i));
        }
        Batch::new(self.shape, inputs, indices.iter().map(|&i| self.labels[i]).collect())
    }

    pub fn as_batch(&self) -> Result<Batch> {
        if self.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Batch::new(self.shape, self.images.clone(), self.labels.clone())
    }

    /// Deterministic stratified split: within each class, the last
    /// `round(count * test_fraction)` samples (at least one when the class has
    /// two or more) go to the test side, the rest to train.
    pub fn split(&self, test_fraction: f64) -> Result<DataSplit> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::Config(format!(
                "test fraction must be in [0, 1), got {test_fraction}"
            )));
        }
        let mut by_class = vec![Vec::new(); self.class_count];
        for (i, &l) in self.labels.iter().enumerate() {
            by_class[l].push(i);
        }
        let mut train = Vec::new();
        let mut test = Vec::new();
        for members in &by_class {
            let mut n_test = (members.len() as f64 * test_fraction).round() as usize;
            if test_fraction > 0.0 && members.len() >= 2 {
                n_test = n_test.clamp(1, members.len() - 1);
            }
            let cut = members.len() - n_test.min(members.len());
            train.extend_from_slice(&members[..cut]);
            test.extend_from_slice(&members[cut..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        if by_class.iter().any(|m| m.is_empty()) {
            return Err(Error::Config("some class has no samples in the train split".into()));
        }
        Ok(DataSplit {
            train: self.subset(&train),
            test: self.subset(&test),
        })
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        let mut images = Vec::with_capacity(indices.len() * self.image(0).len());
        for &i in indices {
            images.extend_from_slice(self.image(i));
        }
        Dataset {
            shape: self.shape,
            images,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        }
    }

    /// SHA-256 over shape, class count, labels and pixel bytes.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for d in [self.shape.0, self.shape.1, self.shape.2, self.class_count, self.len()] {
            h.update((d as u64).to_le_bytes());
        }
        for &l in &self.labels {
            h.update((l as u64).to_le_bytes());
        }
        for &x in &self.images {
            h.update(x.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Per-channel standardization in place. Off unless requested.
    pub fn normalize_per_channel(&mut self) {
        let (c, h, w) = self.shape;
        let plane = h * w;
        let per = c * plane;
        for ch in 0..c {
            let values = || {
                (0..self.len()).flat_map(move |i| (0..plane).map(move |p| i * per + ch * plane + p))
            };
            let n = (self.len() * plane) as f64;
            let mean = values().map(|k| self.images[k]).sum::<f64>() / n;
            let var = values().map(|k| (self.images[k] - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt().max(1e-12);
            for k in values().collect::<Vec<_>>() {
                self.images[k] = (self.images[k] - mean) / std;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: Dataset,
    pub test: Dataset,
}

/// Where a run's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic,
    Idx { images: String, labels: String },
}

impl std::str::FromStr for DatasetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "synthetic" {
            return Ok(DatasetSpec::Synthetic);
        }
        if let Some(rest) = s.strip_prefix("idx:") {
            if let Some((images, labels)) = rest.split_once(',') {
                if !images.is_empty() && !labels.is_empty() {
                    return Ok(DatasetSpec::Idx {
                        images: images.to_string(),
                        labels: labels.to_string(),
                    });
                }
            }
        }
        Err(Error::Config(format!(
            "dataset must be `synthetic` or `idx:IMAGES,LABELS`, got {s:?}"
        )))
    }
}
