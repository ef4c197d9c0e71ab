//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use trp_core::linalg::MatrixF64;
use trp_core::reshape::WeightTensor4D;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> MatrixF64 {
    MatrixF64::new(rows, cols, gaussian_vec(rng, rows * cols)).unwrap()
}

/// Random shape in `1..=max` per side, Gaussian entries.
pub fn random_matrix(rng: &mut ChaCha8Rng, max: usize) -> MatrixF64 {
    let r = rng.random_range(1..=max);
    let c = rng.random_range(1..=max);
    gaussian_matrix(rng, r, c)
}

/// Product of Gaussian `rows x k` and `k x cols` factors: rank `k` almost surely.
pub fn low_rank_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, k: usize) -> MatrixF64 {
    let a = gaussian_matrix(rng, rows, k);
    let b = gaussian_matrix(rng, k, cols);
    a.matmul(&b).unwrap()
}

pub fn random_tensor(rng: &mut ChaCha8Rng, dims: (usize, usize, usize, usize)) -> WeightTensor4D {
    let (n, c, h, w) = dims;
    WeightTensor4D::new(dims, gaussian_vec(rng, n * c * h * w)).unwrap()
}

pub fn to_na(a: &MatrixF64) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

/// Singular values as square roots of the eigenvalues of the smaller Gram
/// matrix, descending.
pub fn eigen_singular_values(a: &MatrixF64) -> Vec<f64> {
    let m = to_na(a);
    let gram = if a.rows() >= a.cols() {
        m.transpose() * &m
    } else {
        &m * m.transpose()
    };
    let mut s: Vec<f64> = SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Singular values from nalgebra's bidiagonal SVD, descending.
pub fn nalgebra_singular_values(a: &MatrixF64) -> Vec<f64> {
    let mut s: Vec<f64> = to_na(a).singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn nalgebra_nuclear_norm(a: &MatrixF64) -> f64 {
    to_na(a).singular_values().iter().sum()
}

/// First `k` in `1..=len` whose tail energy is within budget, recomputing
/// every tail from scratch.
pub fn brute_force_rank(sigma: &[f64], e: f64) -> usize {
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    for k in 1..=sigma.len() {
        let tail: f64 = sigma[k..].iter().map(|s| s * s).sum();
        if tail <= e * total {
            return k;
        }
    }
    sigma.len()
}

/// Textbook zero-padded cross-correlation with explicit padded input.
pub fn naive_conv(
    input: &[f64],
    (c, h, w): (usize, usize, usize),
    weight: &WeightTensor4D,
    bias: &[f64],
) -> Vec<f64> {
    let (n, _, kh, kw) = weight.dims();
    let (ph, pw) = ((kh - 1) / 2, (kw - 1) / 2);
    let (hp, wp) = (h + kh - 1, w + kw - 1);
    let mut padded = vec![0.0; c * hp * wp];
    for i in 0..c {
        for y in 0..h {
            for x in 0..w {
                padded[(i * hp + y + ph) * wp + x + pw] = input[(i * h + y) * w + x];
            }
        }
    }
    let mut out = vec![0.0; n * h * w];
    for o in 0..n {
        for y in 0..h {
            for x in 0..w {
                let mut acc = bias[o];
                for i in 0..c {
                    for dy in 0..kh {
                        for dx in 0..kw {
                            acc += weight.get(o, i, dy, dx) * padded[(i * hp + y + dy) * wp + x + dx];
                        }
                    }
                }
                out[(o * h + y) * w + x] = acc;
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Multiply-accumulates of a stride-1 same-padded convolution, counted one at a time.
pub fn count_conv_macs(n: usize, c: usize, kh: usize, kw: usize, out_h: usize, out_w: usize) -> u64 {
    let mut count = 0u64;
    for _o in 0..n {
        for _y in 0..out_h {
            for _x in 0..out_w {
                for _i in 0..c {
                    for _dy in 0..kh {
                        for _dx in 0..kw {
                            count += 1;
                        }
                    }
                }
            }
        }
    }
    count
}

use trp_core::net::{Batch, Layer, NetworkModel};

/// TinyConvNet with random (non-zero) biases so every parameter is exercised.
pub fn perturbed_tiny_net(seed: u64, input: (usize, usize, usize), classes: usize) -> NetworkModel {
    let mut model = NetworkModel::tiny_conv_net(input, classes, seed).unwrap();
    let mut rng = rng(seed ^ 0xb1a5);
    for layer in &mut model.layers {
        if let Some((_, b)) = layer.params_mut() {
            for v in b {
                *v = 0.1 * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    model
}

pub fn random_batch(rng: &mut ChaCha8Rng, shape: (usize, usize, usize), classes: usize, n: usize) -> Batch {
    let per = shape.0 * shape.1 * shape.2;
    let inputs = (0..n * per).map(|_| rng.random_range(0.0..1.0)).collect();
    let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
    Batch::new(shape, inputs, labels).unwrap()
}

#[derive(Debug, Default)]
pub struct GradCheck {
    pub checked: usize,
    pub failures: Vec<(usize, usize, f64, f64)>,
    pub max_rel: f64,
}

/// Central differences of the mean loss against `value_and_grad` for every
/// parameter. A parameter passes when
/// `|analytic - numeric| <= max(rel_tol * max(|analytic|, |numeric|), abs_floor)`.
pub fn finite_difference_check(model: &NetworkModel, batch: &Batch, step: f64, rel_tol: f64, abs_floor: f64) -> GradCheck {
    let (_, grads) = model.value_and_grad(batch).unwrap();
    let mut probe = model.clone();
    let mut out = GradCheck::default();
    for li in 0..model.layers.len() {
        let Some(g) = &grads.layers[li] else { continue };
        let analytic: Vec<f64> = g.weight.iter().chain(&g.bias).copied().collect();
        let nw = g.weight.len();
        for (p, &a) in analytic.iter().enumerate() {
            let loss_at = |probe: &mut NetworkModel, delta: f64| {
                let (w, b) = probe.layers[li].params_mut().unwrap();
                let slot = if p < nw { &mut w[p] } else { &mut b[p - nw] };
                let orig = *slot;
                *slot = orig + delta;
                let l = probe.forward(batch).unwrap().loss;
                let (w, b) = probe.layers[li].params_mut().unwrap();
                let slot = if p < nw { &mut w[p] } else { &mut b[p - nw] };
                *slot = orig;
                l
            };
            let numeric = (loss_at(&mut probe, step) - loss_at(&mut probe, -step)) / (2.0 * step);
            let diff = (a - numeric).abs();
            let scale = a.abs().max(numeric.abs());
            if scale > abs_floor {
                out.max_rel = out.max_rel.max(diff / scale);
            }
            if diff > (rel_tol * scale).max(abs_floor) {
                out.failures.push((li, p, a, numeric));
            }
            out.checked += 1;
        }
    }
    out
}

/// Loop-nest forward pass of a sequential model, independent of the library's
/// layer kernels.
pub fn reference_logits(model: &NetworkModel, x: &[f64]) -> Vec<f64> {
    let mut cur = x.to_vec();
    let (mut c, mut h, mut w) = model.input_shape;
    for layer in &model.layers {
        match layer {
            Layer::Conv2d(conv) => {
                cur = naive_conv(&cur, (c, h, w), &conv.weight, &conv.bias);
                c = conv.weight.out_channels();
            }
            Layer::Relu => cur.iter_mut().for_each(|v| *v = v.max(0.0)),
            Layer::AvgPool2x2 => {
                let (oh, ow) = (h / 2, w / 2);
                let mut next = vec![0.0; c * oh * ow];
                for ch in 0..c {
                    for y in 0..oh {
                        for xx in 0..ow {
                            let mut s = 0.0;
                            for dy in 0..2 {
                                for dx in 0..2 {
                                    s += cur[(ch * h + 2 * y + dy) * w + 2 * xx + dx];
                                }
                            }
                            next[(ch * oh + y) * ow + xx] = s / 4.0;
                        }
                    }
                }
                cur = next;
                (h, w) = (oh, ow);
            }
            Layer::Dense(d) => {
                cur = (0..d.outputs)
                    .map(|o| d.bias[o] + (0..d.inputs).map(|j| d.weight[o * d.inputs + j] * cur[j]).sum::<f64>())
                    .collect();
                (c, h, w) = (d.outputs, 1, 1);
            }
            Layer::SoftmaxCrossEntropy => break,
        }
    }
    cur
}

pub fn reference_loss(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|v| (v - m).exp()).sum();
    -(logits[label] - m - z.ln())
}
