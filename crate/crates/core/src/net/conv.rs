//! Direct stride-1 cross-correlation with zero "same" padding.
//!
//! Padding before is `(k - 1) / 2` in each dimension, so even kernels pad one
//! more row/column after than before.

use crate::reshape::WeightTensor4D;

pub type Shape3 = (usize, usize, usize);

/// `out[o][y][x] = bias[o] + sum_{i,h,w} W[o][i][h][w] * in[i][y+h-ph][x+w-pw]`.
pub fn conv2d_same(input: &[f64], shape: Shape3, weight: &WeightTensor4D, bias: &[f64]) -> Vec<f64> {
    let (c, height, width) = shape;
    let (n, wc, kh, kw) = weight.dims();
    assert_eq!(wc, c, "conv input channels");
    assert_eq!(input.len(), c * height * width, "conv input length");
    assert_eq!(bias.len(), n, "conv bias length");
    let (ph, pw) = ((kh - 1) / 2, (kw - 1) / 2);
    let plane = height * width;
    let mut out = vec![0.0; n * plane];
    for o in 0..n {
        let dst = &mut out[o * plane..(o + 1) * plane];
        dst.fill(bias[o]);
        for i in 0..c {
            let src = &input[i * plane..(i + 1) * plane];
            for h in 0..kh {
                for x in 0..kw {
                    let wv = weight.get(o, i, h, x);
                    if wv == 0.0 {
                        continue;
                    }
                    for y in 0..height {
                        let sy = y + h;
                        if sy < ph || sy - ph >= height {
                            continue;
                        }
                        let row = &src[(sy - ph) * width..(sy - ph + 1) * width];
                        let drow = &mut dst[y * width..(y + 1) * width];
                        for (xx, d) in drow.iter_mut().enumerate() {
                            let sx = xx + x;
                            if sx < pw || sx - pw >= width {
                                continue;
                            }
                            *d += wv * row[sx - pw];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates weight, bias and (optionally) input gradients for [`conv2d_same`].
pub fn conv2d_same_backward(
    input: &[f64],
    shape: Shape3,
    weight: &WeightTensor4D,
    grad_out: &[f64],
    grad_weight: &mut [f64],
    grad_bias: &mut [f64],
    mut grad_input: Option<&mut [f64]>,
) {
    let (c, height, width) = shape;
    let (n, _, kh, kw) = weight.dims();
    let (ph, pw) = ((kh - 1) / 2, (kw - 1) / 2);
    let plane = height * width;
    for o in 0..n {
        let go = &grad_out[o * plane..(o + 1) * plane];
        grad_bias[o] += go.iter().sum::<f64>();
        for i in 0..c {
            let src = &input[i * plane..(i + 1) * plane];
            for h in 0..kh {
                for x in 0..kw {
                    let widx = weight.index(o, i, h, x);
                    let wv = weight.as_slice()[widx];
                    let mut acc = 0.0;
                    for y in 0..height {
                        let sy = y + h;
                        if sy < ph || sy - ph >= height {
                            continue;
                        }
                        let sy = sy - ph;
                        for xx in 0..width {
                            let sx = xx + x;
                            if sx < pw || sx - pw >= width {
                                continue;
                            }
                            let sx = sx - pw;
                            let g = go[y * width + xx];
                            acc += g * src[sy * width + sx];
                            if let Some(gi) = grad_input.as_deref_mut() {
                                gi[i * plane + sy * width + sx] += g * wv;
                            }
                        }
                    }
                    grad_weight[widx] += acc;
                }
            }
        }
    }
}
