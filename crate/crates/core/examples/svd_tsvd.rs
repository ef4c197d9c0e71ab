//! Jacobi SVD of a small matrix, energy-thresholded truncation at a few
//! thresholds, and the two perturbation bounds that make truncation safe.
//!
//! ```text
//! cargo run --example svd_tsvd
//! ```

use trp_core::linalg::{check_low_rank_residual, check_mirsky, svd, tsvd, MatrixF64};

fn main() -> trp_core::Result<()> {
    // Five rank-one terms with weights 4, 2, 1, 0.3, 0.1.
    let weights = [4.0, 2.0, 1.0, 0.3, 0.1];
    let a = MatrixF64::from_fn(6, 5, |i, j| {
        weights
            .iter()
            .enumerate()
            .map(|(r, w)| {
                let u = ((r + 1) as f64 * (i as f64 + 0.5)).cos();
                let v = ((r + 1) as f64 * (j as f64 + 0.3)).sin();
                w * u * v
            })
            .sum()
    });
    let f = svd(&a)?;
    println!("sigma = {:.6?}", f.sigma);
    let err = f.reconstruct().sub(&a)?.max_abs();
    println!("max |U S V^T - A| = {err:.2e}");

    for e in [0.001, 0.02, 0.05, 0.5] {
        let t = tsvd(&a, e)?;
        println!(
            "e = {e:<5}: k = {} of {}, discarded energy {:.3e}",
            t.k, t.full_rank, t.discarded_energy
        );
    }

    let noise = MatrixF64::from_fn(6, 5, |i, j| 1e-2 * ((i * 5 + j) as f64).sin());
    let m = check_mirsky(&a, &noise)?;
    println!("Mirsky: {:.4e} <= {:.4e}: {}", m.lhs, m.rhs, m.holds);

    let best = f.truncated(2).reconstruct();
    let r = check_low_rank_residual(&a, &best, 2)?;
    println!("rank-2 residual: {:.6} >= {:.6}: {} (tight at the truncated SVD)", r.lhs, r.rhs, r.holds);
    Ok(())
}
