//! Singular-value perturbation bounds, checked numerically.

use super::matrix::MatrixF64;
use super::norms::{frobenius_norm, numerical_rank};
use super::svd::svd;
use crate::error::{Error, Result};

/// Absolute slack granted to every bound comparison.
pub const BOUND_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Mirsky: `sqrt(sum_i |sigma_i(A + E) - sigma_i(A)|^2) <= ||E||_F`.
pub fn check_mirsky(a: &MatrixF64, noise: &MatrixF64) -> Result<BoundReport> {
    if a.shape() != noise.shape() {
        return Err(Error::Shape(format!(
            "perturbation is {:?}, matrix is {:?}",
            noise.shape(),
            a.shape()
        )));
    }
    let sigma = svd(a)?.sigma;
    let perturbed = svd(&a.add(noise)?)?.sigma;
    let lhs = sigma
        .iter()
        .zip(&perturbed)
        .map(|(s, t)| (t - s).powi(2))
        .sum::<f64>()
        .sqrt();
    let rhs = frobenius_norm(noise);
    Ok(BoundReport {
        lhs,
        rhs,
        holds: lhs <= rhs + BOUND_SLACK,
    })
}

/// For `B` of rank at most `k`: `||B - A||_F >= sqrt(sum_{j>k} sigma_j(A)^2)`.
///
/// `lhs` is the residual norm, `rhs` the optimal tail.
pub fn check_low_rank_residual(a: &MatrixF64, b: &MatrixF64, k: usize) -> Result<BoundReport> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "approximant is {:?}, matrix is {:?}",
            b.shape(),
            a.shape()
        )));
    }
    let b_rank = numerical_rank(&svd(b)?.sigma);
    if b_rank > k {
        return Err(Error::Precondition(format!(
            "approximant has numerical rank {b_rank} > {k}"
        )));
    }
    let sigma = svd(a)?.sigma;
    let rhs = sigma
        .iter()
        .skip(k)
        .map(|s| s * s)
        .sum::<f64>()
        .sqrt();
    let lhs = frobenius_norm(&b.sub(a)?);
    Ok(BoundReport {
        lhs,
        rhs,
        holds: lhs + BOUND_SLACK >= rhs,
    })
}
