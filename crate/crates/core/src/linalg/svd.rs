//! One-sided (Hestenes) Jacobi SVD and energy-thresholded truncation.

use super::matrix::MatrixF64;
use crate::error::{Error, Result};

/// Maximum number of full Jacobi sweeps before giving up.
pub const MAX_SWEEPS: usize = 60;

/// A column pair counts as orthogonal once `|<a_p, a_q>| <= ORTHO_TOL * |a_p| |a_q|`.
const ORTHO_TOL: f64 = 1e-15;

/// Columns whose norm is at most this fraction of `||A||_F` are treated as zero.
pub const NEGLIGIBLE_COLUMN: f64 = 1e-12;

/// Thin singular value decomposition `A = U diag(sigma) V^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    /// `rows x r` with orthonormal columns.
    pub u: MatrixF64,
    /// Non-increasing, non-negative; length `r = min(rows, cols)` unless truncated.
    pub sigma: Vec<f64>,
    /// `cols x r` with orthonormal columns.
    pub v: MatrixF64,
}

impl SvdFactors {
    pub fn rank_count(&self) -> usize {
        self.sigma.len()
    }

    /// `U diag(sigma) V^T`.
    pub fn reconstruct(&self) -> MatrixF64 {
        let rows = self.u.rows();
        let cols = self.v.rows();
        let mut out = MatrixF64::zeros(rows, cols);
        for (l, &s) in self.sigma.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for i in 0..rows {
                let us = self.u.get(i, l) * s;
                if us == 0.0 {
                    continue;
                }
                for j in 0..cols {
                    let cur = out.get(i, j);
                    out.set(i, j, cur + us * self.v.get(j, l));
                }
            }
        }
        out
    }

    /// Keeps the leading `k` triplets.
    pub fn truncated(&self, k: usize) -> SvdFactors {
        let k = k.min(self.sigma.len());
        SvdFactors {
            u: take_columns(&self.u, k),
            sigma: self.sigma[..k].to_vec(),
            v: take_columns(&self.v, k),
        }
    }
}

fn take_columns(m: &MatrixF64, k: usize) -> MatrixF64 {
    MatrixF64::from_fn(m.rows(), k, |i, j| m.get(i, j))
}

/// Result of the energy-thresholded truncated SVD.
#[derive(Debug, Clone, PartialEq)]
pub struct TsvdResult {
    pub k: usize,
    pub factors: SvdFactors,
    pub retained_energy: f64,
    pub discarded_energy: f64,
    /// Rank count of the untruncated decomposition, `min(rows, cols)`.
    pub full_rank: usize,
}

impl TsvdResult {
    pub fn is_truncating(&self) -> bool {
        self.k < self.full_rank
    }
}

/// Full thin SVD by one-sided Jacobi rotations.
///
/// Wide inputs are handled through the transpose. Output is deterministic:
/// pairs are swept in cyclic row order, singular values are sorted by a stable
/// descending sort, and each left singular vector has its first nonzero entry
/// made non-negative.
pub fn svd(a: &MatrixF64) -> Result<SvdFactors> {
    if a.is_empty() {
        return Err(Error::Precondition("svd of an empty matrix".into()));
    }
    if a.rows() >= a.cols() {
        let (u, sigma, v) = jacobi_tall(a)?;
        Ok(canonical_signs(SvdFactors { u, sigma, v }))
    } else {
        let (u_t, sigma, v_t) = jacobi_tall(&a.transpose())?;
        Ok(canonical_signs(SvdFactors {
            u: v_t,
            sigma,
            v: u_t,
        }))
    }
}

/// Runs the Jacobi iteration on a matrix with `rows >= cols`.
fn jacobi_tall(a: &MatrixF64) -> Result<(MatrixF64, Vec<f64>, MatrixF64)> {
    let m = a.rows();
    let n = a.cols();

    // Column-major working copies.
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let fro = a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    let zero_sq = (NEGLIGIBLE_COLUMN * fro).powi(2);

    let mut converged = n < 2 || fro == 0.0;
    let mut residual = 0.0;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        residual = 0.0_f64;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (alpha, beta, gamma) = column_grams(&w[p], &w[q]);
                if alpha <= zero_sq || beta <= zero_sq || gamma == 0.0 {
                    continue;
                }
                let scale = (alpha * beta).sqrt();
                let rel = gamma.abs() / scale;
                residual = residual.max(rel);
                if rel <= ORTHO_TOL {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps, residual });
    }

    let norms: Vec<f64> = w
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let zero_norm = NEGLIGIBLE_COLUMN * fro;
    let mut sigma = Vec::with_capacity(n);
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for &j in &order {
        let s = norms[j];
        if s > zero_norm && s > 0.0 {
            sigma.push(s);
            u_cols.push(w[j].iter().map(|x| x / s).collect());
        } else {
            sigma.push(0.0);
            missing.push(u_cols.len());
            u_cols.push(Vec::new());
        }
        v_cols.push(v[j].clone());
    }
    complete_basis(&mut u_cols, &missing, m);

    let u = MatrixF64::from_fn(m, n, |i, j| u_cols[j][i]);
    let v = MatrixF64::from_fn(n, n, |i, j| v_cols[j][i]);
    Ok((u, sigma, v))
}

fn column_grams(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut gamma = 0.0;
    for (a, b) in x.iter().zip(y) {
        alpha += a * a;
        beta += b * b;
        gamma += a * b;
    }
    (alpha, beta, gamma)
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills the empty columns listed in `missing` with unit vectors orthogonal to
/// every other column, drawn from the standard basis by modified Gram-Schmidt.
fn complete_basis(cols: &mut [Vec<f64>], missing: &[usize], m: usize) {
    let mut candidate = 0;
    for &slot in missing {
        loop {
            assert!(candidate < m, "orthonormal completion ran out of basis vectors");
            let mut e = vec![0.0; m];
            e[candidate] = 1.0;
            candidate += 1;
            // Two passes of Gram-Schmidt for stability.
            for _ in 0..2 {
                for col in cols.iter().filter(|c| !c.is_empty()) {
                    let d: f64 = col.iter().zip(&e).map(|(a, b)| a * b).sum();
                    for (x, c) in e.iter_mut().zip(col) {
                        *x -= d * c;
                    }
                }
            }
            let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                cols[slot] = e.into_iter().map(|x| x / norm).collect();
                break;
            }
        }
    }
}

fn canonical_signs(mut f: SvdFactors) -> SvdFactors {
    for l in 0..f.sigma.len() {
        let first = (0..f.u.rows())
            .map(|i| f.u.get(i, l))
            .find(|x| x.abs() > 1e-14);
        if matches!(first, Some(x) if x < 0.0) {
            for i in 0..f.u.rows() {
                f.u.set(i, l, -f.u.get(i, l));
            }
            for i in 0..f.v.rows() {
                f.v.set(i, l, -f.v.get(i, l));
            }
        }
    }
    f
}

/// Smallest `k >= 1` whose discarded tail energy satisfies
/// `sum_{j>k} sigma_j^2 <= e * sum_i sigma_i^2`.
///
/// `sigma` must be non-increasing. An all-zero spectrum yields `k = 1`.
pub fn select_rank(sigma: &[f64], e: f64) -> usize {
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    let budget = e * total;
    // suffix[k] = sum_{j >= k} sigma_j^2 (0-based), accumulated from the small end.
    let mut suffix = vec![0.0; sigma.len() + 1];
    for j in (0..sigma.len()).rev() {
        suffix[j] = suffix[j + 1] + sigma[j] * sigma[j];
    }
    (1..=sigma.len())
        .find(|&k| suffix[k] <= budget)
        .unwrap_or(sigma.len())
}

/// Energy-thresholded truncated SVD with a rank floor of one.
pub fn tsvd(a: &MatrixF64, e: f64) -> Result<TsvdResult> {
    check_energy(e)?;
    let full = svd(a)?;
    Ok(truncate_by_energy(full, e))
}

pub(crate) fn check_energy(e: f64) -> Result<()> {
    if !(e > 0.0 && e < 1.0) {
        return Err(Error::Config(format!(
            "energy ratio must lie in (0, 1), got {e}"
        )));
    }
    Ok(())
}

pub(crate) fn truncate_by_energy(full: SvdFactors, e: f64) -> TsvdResult {
    let full_rank = full.sigma.len();
    let k = select_rank(&full.sigma, e);
    let total: f64 = full.sigma.iter().map(|s| s * s).sum();
    let tail: f64 = full.sigma[k..].iter().map(|s| s * s).sum();
    let discarded_energy = if total > 0.0 { tail / total } else { 0.0 };
    TsvdResult {
        k,
        factors: full.truncated(k),
        retained_energy: 1.0 - discarded_energy,
        discarded_energy,
        full_rank,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let f = svd(&MatrixF64::identity(3)).unwrap();
        assert_eq!(f.sigma, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_is_permutation_free() {
        let f = svd(&MatrixF64::from_diag(&[3.0, 2.0, 1.0])).unwrap();
        assert_eq!(f.sigma, vec![3.0, 2.0, 1.0]);
        assert_eq!(f.u, MatrixF64::identity(3));
        assert_eq!(f.v, MatrixF64::identity(3));
    }

    #[test]
    fn unsorted_diagonal_is_sorted() {
        let f = svd(&MatrixF64::from_diag(&[1.0, -4.0, 2.0])).unwrap();
        assert_close(&f.sigma, &[4.0, 2.0, 1.0], 0.0);
        let r = f.reconstruct();
        assert_eq!(r, MatrixF64::from_diag(&[1.0, -4.0, 2.0]));
    }

    #[test]
    fn rank_deficient_and_zero_matrices_complete_u() {
        for a in [
            MatrixF64::zeros(3, 2),
            MatrixF64::new(3, 2, vec![1., 2., 2., 4., 3., 6.]).unwrap(),
        ] {
            let f = svd(&a).unwrap();
            let utu = f.u.transpose().matmul(&f.u).unwrap();
            assert!(utu.sub(&MatrixF64::identity(2)).unwrap().max_abs() < 1e-12);
            assert!(f.reconstruct().sub(&a).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn wide_matrix_goes_through_transpose() {
        let a = MatrixF64::new(2, 4, vec![1., 0., 2., -1., 0., 3., 1., 1.]).unwrap();
        let f = svd(&a).unwrap();
        assert_eq!(f.u.shape(), (2, 2));
        assert_eq!(f.v.shape(), (4, 2));
        assert!(f.reconstruct().sub(&a).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn left_vectors_start_non_negative() {
        let a = MatrixF64::new(3, 3, vec![-1., 2., 0., 0., -3., 1., 2., 1., -2.]).unwrap();
        let f = svd(&a).unwrap();
        for l in 0..3 {
            let first = f.u.column(l).into_iter().find(|x| x.abs() > 1e-14).unwrap();
            assert!(first > 0.0);
        }
    }

    #[test]
    fn empty_matrix_is_rejected() {
        assert!(matches!(
            svd(&MatrixF64::zeros(0, 3)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn tsvd_examples() {
        let d = MatrixF64::from_diag(&[3.0, 2.0, 1.0]);
        assert_eq!(tsvd(&d, 0.02).unwrap().k, 3);
        assert_eq!(tsvd(&d, 0.5).unwrap().k, 1);
        let r = tsvd(&d, 0.1).unwrap();
        // tail at k=2 is 1/14 ~ 0.0714 <= 0.1
        assert_eq!(r.k, 2);
        assert!((r.discarded_energy - 1.0 / 14.0).abs() < 1e-15);
        assert!((r.retained_energy + r.discarded_energy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tsvd_accepts_exact_tie() {
        // tail at k=1 is exactly 1/2 of the total.
        assert_eq!(select_rank(&[1.0, 1.0], 0.5), 1);
        assert_eq!(select_rank(&[2.0, 1.0, 1.0, 1.0], 0.25), 3);
    }

    #[test]
    fn tsvd_rank_one_outer_product() {
        let a = MatrixF64::from_fn(4, 3, |i, j| (i as f64 + 1.0) * (j as f64 - 0.5));
        for e in [0.001, 0.3, 0.9] {
            assert_eq!(tsvd(&a, e).unwrap().k, 1);
        }
    }

    #[test]
    fn tsvd_rejects_bad_energy() {
        let a = MatrixF64::identity(2);
        for e in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(tsvd(&a, e), Err(Error::Config(_))));
        }
    }

    #[test]
    fn zero_matrix_floors_at_one() {
        let r = tsvd(&MatrixF64::zeros(3, 3), 0.5).unwrap();
        assert_eq!(r.k, 1);
        assert_eq!(r.discarded_energy, 0.0);
        assert_eq!(r.retained_energy, 1.0);
    }
}
