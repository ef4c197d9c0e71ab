//! Convolution filter banks and their matrix views.
//!
//! Two matricizations are supported:
//!
//! * channel-wise: `n x (c*kh*kw)`, one flattened filter per row. A rank-`k`
//!   factorization becomes a `k`-filter `kh x kw` convolution followed by a
//!   `1 x 1` convolution.
//! * spatial-wise: `(c*kh) x (n*kw)` with `M[c*kh + h][n*kw + w] = W[n][c][h][w]`.
//!   A rank-`k` factorization becomes a vertical `kh x 1` convolution followed
//!   by a horizontal `1 x kw` convolution.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_energy, svd, truncate_by_energy, MatrixF64, TsvdResult};

/// Filter bank `W[n][c][kh][kw]`, stored row-major in that order.
#[derive(Clone, PartialEq)]
pub struct WeightTensor4D {
    n: usize,
    c: usize,
    kh: usize,
    kw: usize,
    data: Vec<f64>,
}

pub type Dims4 = (usize, usize, usize, usize);

impl WeightTensor4D {
    pub fn new(dims: Dims4, data: Vec<f64>) -> Result<Self> {
        let (n, c, kh, kw) = dims;
        if n == 0 || c == 0 || kh == 0 || kw == 0 {
            return Err(Error::Shape(format!("filter dims must be >= 1, got {dims:?}")));
        }
        if data.len() != n * c * kh * kw {
            return Err(Error::Shape(format!(
                "filter {dims:?} needs {} values, got {}",
                n * c * kh * kw,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("filter bank {dims:?}")));
        }
        Ok(Self { n, c, kh, kw, data })
    }

    pub fn zeros(dims: Dims4) -> Self {
        let (n, c, kh, kw) = dims;
        assert!(n > 0 && c > 0 && kh > 0 && kw > 0, "filter dims must be >= 1");
        Self {
            n,
            c,
            kh,
            kw,
            data: vec![0.0; n * c * kh * kw],
        }
    }

    pub fn dims(&self) -> Dims4 {
        (self.n, self.c, self.kh, self.kw)
    }

    pub fn out_channels(&self) -> usize {
        self.n
    }

    pub fn in_channels(&self) -> usize {
        self.c
    }

    pub fn kernel(&self) -> (usize, usize) {
        (self.kh, self.kw)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, o: usize, i: usize, h: usize, w: usize) -> usize {
        ((o * self.c + i) * self.kh + h) * self.kw + w
    }

    #[inline]
    pub fn get(&self, o: usize, i: usize, h: usize, w: usize) -> f64 {
        self.data[self.index(o, i, h, w)]
    }

    #[inline]
    pub fn set(&mut self, o: usize, i: usize, h: usize, w: usize, value: f64) {
        let idx = self.index(o, i, h, w);
        self.data[idx] = value;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl fmt::Debug for WeightTensor4D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightTensor4D")
            .field("dims", &self.dims())
            .field("norm", &self.frobenius_norm())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompScheme {
    ChannelWise,
    SpatialWise,
}

impl DecompScheme {
    pub fn matrix_shape(self, dims: Dims4) -> (usize, usize) {
        let (n, c, kh, kw) = dims;
        match self {
            DecompScheme::ChannelWise => (n, c * kh * kw),
            DecompScheme::SpatialWise => (c * kh, n * kw),
        }
    }

    /// Shapes of the two cascaded filter banks at rank `k`.
    pub fn factor_dims(self, dims: Dims4, k: usize) -> (Dims4, Dims4) {
        let (n, c, kh, kw) = dims;
        match self {
            DecompScheme::ChannelWise => ((k, c, kh, kw), (n, k, 1, 1)),
            DecompScheme::SpatialWise => ((k, c, kh, 1), (n, k, 1, kw)),
        }
    }
}

impl fmt::Display for DecompScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecompScheme::ChannelWise => "channel",
            DecompScheme::SpatialWise => "spatial",
        })
    }
}

impl FromStr for DecompScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "channel" | "channel_wise" => Ok(DecompScheme::ChannelWise),
            "spatial" | "spatial_wise" => Ok(DecompScheme::SpatialWise),
            other => Err(Error::Config(format!(
                "unknown decomposition scheme {other:?} (expected channel or spatial)"
            ))),
        }
    }
}

pub fn to_matrix(w: &WeightTensor4D, scheme: DecompScheme) -> MatrixF64 {
    let (n, c, kh, kw) = w.dims();
    match scheme {
        DecompScheme::ChannelWise => {
            MatrixF64::new(n, c * kh * kw, w.data.clone()).expect("tensor invariants hold")
        }
        DecompScheme::SpatialWise => {
            let mut m = MatrixF64::zeros(c * kh, n * kw);
            for o in 0..n {
                for i in 0..c {
                    for h in 0..kh {
                        for x in 0..kw {
                            m.set(i * kh + h, o * kw + x, w.get(o, i, h, x));
                        }
                    }
                }
            }
            m
        }
    }
}

pub fn from_matrix(m: &MatrixF64, scheme: DecompScheme, dims: Dims4) -> Result<WeightTensor4D> {
    let expected = scheme.matrix_shape(dims);
    if m.shape() != expected {
        return Err(Error::Config(format!(
            "{scheme} matrix for filter {dims:?} must be {expected:?}, got {:?}",
            m.shape()
        )));
    }
    let mut w = WeightTensor4D::zeros(dims);
    match scheme {
        DecompScheme::ChannelWise => w.data.copy_from_slice(m.as_slice()),
        DecompScheme::SpatialWise => {
            let (n, c, kh, kw) = dims;
            for o in 0..n {
                for i in 0..c {
                    for h in 0..kh {
                        for x in 0..kw {
                            w.set(o, i, h, x, m.get(i * kh + h, o * kw + x));
                        }
                    }
                }
            }
        }
    }
    Ok(w)
}

/// Low-rank projection: TSVD of the matrix view, reshaped back.
///
/// When nothing is truncated the input is returned unchanged, bit for bit.
pub fn low_rank_project(
    w: &WeightTensor4D,
    scheme: DecompScheme,
    e: f64,
) -> Result<(WeightTensor4D, TsvdResult)> {
    check_energy(e)?;
    let t = truncate_by_energy(svd(&to_matrix(w, scheme))?, e);
    if !t.is_truncating() {
        return Ok((w.clone(), t));
    }
    let projected = from_matrix(&t.factors.reconstruct(), scheme, w.dims())?;
    Ok((projected, t))
}

/// A convolution replaced by two cascaded convolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedPair {
    pub scheme: DecompScheme,
    pub first: WeightTensor4D,
    pub second: WeightTensor4D,
    pub rank: usize,
}

/// Splits `w` into the rank-`k` cascade selected by energy threshold `e`.
///
/// Singular values are folded into the second factor.
pub fn decompose_export(w: &WeightTensor4D, scheme: DecompScheme, e: f64) -> Result<DecomposedPair> {
    check_energy(e)?;
    let t = truncate_by_energy(svd(&to_matrix(w, scheme))?, e);
    Ok(pair_from_factors(w.dims(), scheme, &t))
}

fn pair_from_factors(dims: Dims4, scheme: DecompScheme, t: &TsvdResult) -> DecomposedPair {
    let (n, c, kh, kw) = dims;
    let k = t.k;
    let f = &t.factors;
    let (first_dims, second_dims) = scheme.factor_dims(dims, k);
    let mut first = WeightTensor4D::zeros(first_dims);
    let mut second = WeightTensor4D::zeros(second_dims);
    match scheme {
        DecompScheme::ChannelWise => {
            // first[r] = row r of V^T; second[o][r] = U[o][r] * sigma_r
            for r in 0..k {
                for i in 0..c {
                    for h in 0..kh {
                        for x in 0..kw {
                            first.set(r, i, h, x, f.v.get((i * kh + h) * kw + x, r));
                        }
                    }
                }
            }
            for o in 0..n {
                for r in 0..k {
                    second.set(o, r, 0, 0, f.u.get(o, r) * f.sigma[r]);
                }
            }
        }
        DecompScheme::SpatialWise => {
            // rows of the matrix view index (c, h): U gives the vertical filters,
            // columns index (n, w): V * sigma gives the horizontal ones.
            for r in 0..k {
                for i in 0..c {
                    for h in 0..kh {
                        first.set(r, i, h, 0, f.u.get(i * kh + h, r));
                    }
                }
            }
            for o in 0..n {
                for r in 0..k {
                    for x in 0..kw {
                        second.set(o, r, 0, x, f.v.get(o * kw + x, r) * f.sigma[r]);
                    }
                }
            }
        }
    }
    DecomposedPair {
        scheme,
        first,
        second,
        rank: k,
    }
}

/// Multiply-accumulate counts for one convolution and its decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlopsReport {
    pub original: u64,
    pub decomposed: u64,
    pub speedup: f64,
}

/// MAC counts over an `out_h x out_w` output map.
pub fn flops_report(dims: Dims4, spatial: (usize, usize), scheme: DecompScheme, k: usize) -> FlopsReport {
    let (n, c, kh, kw) = dims;
    let [n, c, kh, kw, k] = [n, c, kh, kw, k].map(|v| v as u64);
    let hw = (spatial.0 * spatial.1) as u64;
    let original = n * c * kh * kw * hw;
    let decomposed = match scheme {
        DecompScheme::ChannelWise => k * c * kh * kw * hw + n * k * hw,
        DecompScheme::SpatialWise => k * c * kh * hw + n * k * kw * hw,
    };
    FlopsReport {
        original,
        decomposed,
        speedup: original as f64 / decomposed as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_tensor(dims: Dims4) -> WeightTensor4D {
        let len = dims.0 * dims.1 * dims.2 * dims.3;
        let data = (0..len).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        WeightTensor4D::new(dims, data).unwrap()
    }

    #[test]
    fn scalar_tensor_both_schemes() {
        let w = WeightTensor4D::new((1, 1, 1, 1), vec![7.0]).unwrap();
        for s in [DecompScheme::ChannelWise, DecompScheme::SpatialWise] {
            let m = to_matrix(&w, s);
            assert_eq!(m.as_slice(), &[7.0]);
            assert_eq!(from_matrix(&m, s, (1, 1, 1, 1)).unwrap(), w);
        }
    }

    #[test]
    fn spatial_layout_matches_index_map() {
        let w = seq_tensor((2, 3, 2, 4));
        let m = to_matrix(&w, DecompScheme::SpatialWise);
        assert_eq!(m.shape(), (6, 8));
        assert_eq!(m.get(2 * 2 + 1, 4 + 3), w.get(1, 2, 1, 3));
    }

    #[test]
    fn from_matrix_shape_mismatch_is_config_error() {
        let m = MatrixF64::zeros(3, 3);
        assert!(matches!(
            from_matrix(&m, DecompScheme::ChannelWise, (2, 1, 1, 1)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_matrix_gives_zero_tensor() {
        let w = from_matrix(&MatrixF64::zeros(6, 8), DecompScheme::SpatialWise, (2, 3, 2, 4)).unwrap();
        assert!(w.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn invalid_tensors_rejected() {
        assert!(WeightTensor4D::new((0, 1, 1, 1), vec![]).is_err());
        assert!(WeightTensor4D::new((1, 1, 1, 2), vec![1.0]).is_err());
        assert!(WeightTensor4D::new((1, 1, 1, 1), vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn factor_shapes() {
        let w = seq_tensor((4, 3, 3, 3));
        let cw = decompose_export(&w, DecompScheme::ChannelWise, 0.1).unwrap();
        assert_eq!(cw.first.dims(), (cw.rank, 3, 3, 3));
        assert_eq!(cw.second.dims(), (4, cw.rank, 1, 1));
        let sw = decompose_export(&w, DecompScheme::SpatialWise, 0.1).unwrap();
        assert_eq!(sw.first.dims(), (sw.rank, 3, 3, 1));
        assert_eq!(sw.second.dims(), (4, sw.rank, 1, 3));
    }

    #[test]
    fn flops_examples() {
        let r = flops_report((64, 64, 3, 3), (8, 8), DecompScheme::ChannelWise, 16);
        assert_eq!(r.original, 2_359_296);
        assert_eq!(r.decomposed, 655_360);
        assert!((r.speedup - 3.6).abs() < 1e-12);

        let r = flops_report((8, 4, 3, 3), (8, 8), DecompScheme::SpatialWise, 2);
        assert_eq!(r.original, 18_432);
        assert_eq!(r.decomposed, 4_608);
        assert_eq!(r.speedup, 4.0);

        // k*c + n*k == n*c at n = c = 2, k = 1
        let r = flops_report((2, 2, 1, 1), (5, 5), DecompScheme::ChannelWise, 1);
        assert_eq!(r.original, r.decomposed);
        assert_eq!(r.speedup, 1.0);
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("channel".parse::<DecompScheme>().unwrap(), DecompScheme::ChannelWise);
        assert_eq!("spatial".parse::<DecompScheme>().unwrap(), DecompScheme::SpatialWise);
        assert!("depthwise".parse::<DecompScheme>().is_err());
    }
}
