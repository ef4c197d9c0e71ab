use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Highest cosine frequency (exclusive) used in class templates.
const FREQS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub per_class: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// Standard deviation of the per-pixel Gaussian noise.
    pub noise: f64,
    pub test_fraction: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            classes: 4,
            per_class: 200,
            channels: 1,
            height: 8,
            width: 8,
            noise: 0.3,
            test_fraction: 0.25,
        }
    }
}

/// Class templates are seeded combinations of low-frequency 2D cosines,
/// rescaled into `[0.25, 0.75]`; each sample adds Gaussian noise and is
/// clamped to `[0, 1]`. Samples are ordered class by class.
pub fn generate_synthetic(seed: u64, cfg: &SyntheticConfig) -> Result<Dataset> {
    if cfg.classes < 2 || cfg.per_class < 2 {
        return Err(Error::Config(format!(
            "synthetic data needs >= 2 classes and >= 2 samples per class, got {} x {}",
            cfg.classes, cfg.per_class
        )));
    }
    if cfg.channels == 0 || cfg.height == 0 || cfg.width == 0 {
        return Err(Error::Config("synthetic image dims must be >= 1".into()));
    }
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        return Err(Error::Config(format!("noise must be >= 0, got {}", cfg.noise)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, h, w) = (cfg.channels, cfg.height, cfg.width);
    let per = c * h * w;

    let templates: Vec<Vec<f64>> = (0..cfg.classes).map(|_| template(&mut rng, c, h, w)).collect();

    let mut images = Vec::with_capacity(cfg.classes * cfg.per_class * per);
    let mut labels = Vec::with_capacity(cfg.classes * cfg.per_class);
    for (k, t) in templates.iter().enumerate() {
        for _ in 0..cfg.per_class {
            for &base in t {
                let z: f64 = rng.sample(StandardNormal);
                images.push((base + cfg.noise * z).clamp(0.0, 1.0));
            }
            labels.push(k);
        }
    }
    Dataset::new((c, h, w), images, labels, cfg.classes)
}

fn template(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    let mut t = vec![0.0; c * h * w];
    for ch in 0..c {
        for a in 0..FREQS {
            for b in 0..FREQS {
                if a == 0 && b == 0 {
                    continue;
                }
                let z: f64 = rng.sample(StandardNormal);
                let coef = z / (1 + a + b) as f64;
                for y in 0..h {
                    let cy = (PI * a as f64 * (y as f64 + 0.5) / h as f64).cos();
                    for x in 0..w {
                        let cx = (PI * b as f64 * (x as f64 + 0.5) / w as f64).cos();
                        t[(ch * h + y) * w + x] += coef * cy * cx;
                    }
                }
            }
        }
    }
    let peak = t.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        t.iter_mut().for_each(|v| *v = 0.5 + 0.25 * *v / peak);
    } else {
        t.fill(0.5);
    }
    t
}

/// Accuracy on `test` of the classifier assigning each sample to the class
/// with the nearest (Euclidean) mean image in `train`.
pub fn nearest_centroid_accuracy(train: &Dataset, test: &Dataset) -> f64 {
    let per = train.image(0).len();
    let mut centroids = vec![vec![0.0; per]; train.class_count()];
    let mut counts = vec![0usize; train.class_count()];
    for (i, &l) in train.labels().iter().enumerate() {
        counts[l] += 1;
        for (c, x) in centroids[l].iter_mut().zip(train.image(i)) {
            *c += x;
        }
    }
    for (c, &n) in centroids.iter_mut().zip(&counts) {
        c.iter_mut().for_each(|v| *v /= n.max(1) as f64);
    }
    let correct = (0..test.len())
        .filter(|&i| {
            let x = test.image(i);
            let best = centroids
                .iter()
                .map(|c| c.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                .enumerate()
                .fold((0, f64::INFINITY), |best, (k, d)| if d < best.1 { (k, d) } else { best })
                .0;
            best == test.labels()[i]
        })
        .count();
    correct as f64 / test.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_bytes() {
        let cfg = SyntheticConfig::default();
        let a = generate_synthetic(7, &cfg).unwrap();
        let b = generate_synthetic(7, &cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_synthetic(8, &cfg).unwrap());
    }

    #[test]
    fn noiseless_classes_are_constant() {
        let cfg = SyntheticConfig {
            noise: 0.0,
            per_class: 5,
            ..Default::default()
        };
        let d = generate_synthetic(3, &cfg).unwrap();
        for i in 0..d.len() {
            let first = (i / 5) * 5;
            assert_eq!(d.image(i), d.image(first));
        }
    }

    #[test]
    fn pixels_within_unit_range() {
        let d = generate_synthetic(1, &SyntheticConfig::default()).unwrap();
        assert!(d.images().iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn degenerate_sizes_rejected() {
        for cfg in [
            SyntheticConfig { classes: 1, ..Default::default() },
            SyntheticConfig { per_class: 1, ..Default::default() },
            SyntheticConfig { height: 0, ..Default::default() },
        ] {
            assert!(matches!(generate_synthetic(0, &cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn centroid_baseline_is_between_chance_and_perfect() {
        let cfg = SyntheticConfig::default();
        let d = generate_synthetic(0, &cfg).unwrap();
        let s = d.split(cfg.test_fraction).unwrap();
        let acc = nearest_centroid_accuracy(&s.train, &s.test);
        assert!(acc > 1.0 / cfg.classes as f64 && acc < 1.0, "centroid accuracy {acc}");
    }
}
