use super::matrix::MatrixF64;
use super::svd::{svd, SvdFactors};
use crate::error::Result;

/// Singular values at or below this fraction of the largest are numerically zero.
pub const NUMERICAL_RANK_TOL: f64 = 1e-10;

pub fn frobenius_norm(a: &MatrixF64) -> f64 {
    a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sum of singular values.
pub fn nuclear_norm(a: &MatrixF64) -> Result<f64> {
    Ok(svd(a)?.sigma.iter().sum())
}

/// Number of singular values above `NUMERICAL_RANK_TOL * sigma_1`.
pub fn numerical_rank(sigma: &[f64]) -> usize {
    let Some(&top) = sigma.first() else {
        return 0;
    };
    if top == 0.0 {
        return 0;
    }
    sigma
        .iter()
        .take_while(|&&s| s > NUMERICAL_RANK_TOL * top)
        .count()
}

/// Sub-gradient `U_tru V_tru^T` of the nuclear norm, with `U`, `V` truncated to
/// the numerical rank of `a`.
pub fn nuclear_subgradient(a: &MatrixF64) -> Result<MatrixF64> {
    let f = svd(a)?;
    Ok(subgradient_from_factors(&f))
}

fn subgradient_from_factors(f: &SvdFactors) -> MatrixF64 {
    let r = numerical_rank(&f.sigma);
    let rows = f.u.rows();
    let cols = f.v.rows();
    let mut out = MatrixF64::zeros(rows, cols);
    for l in 0..r {
        for i in 0..rows {
            let ui = f.u.get(i, l);
            for j in 0..cols {
                out.set(i, j, out.get(i, j) + ui * f.v.get(j, l));
            }
        }
    }
    out
}
