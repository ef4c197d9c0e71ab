//! Nuclear norm and its sub-gradient `U V^T`, compared with a central
//! difference along a fixed direction.
//!
//! ```text
//! cargo run --example nuclear_norm
//! ```

use trp_core::linalg::{nuclear_norm, nuclear_subgradient, numerical_rank, svd, MatrixF64};

fn main() -> trp_core::Result<()> {
    let a = MatrixF64::from_fn(4, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + 0.1 * i as f64);
    let d = MatrixF64::from_fn(4, 6, |i, j| ((i + 2 * j) as f64).cos());

    let g = nuclear_subgradient(&a)?;
    println!("||A||_* = {:.10}", nuclear_norm(&a)?);
    println!("<G, A>  = {:.10}", g.dot(&a)?);

    let h = 1e-6;
    let numeric = (nuclear_norm(&a.add(&d.scale(h))?)? - nuclear_norm(&a.sub(&d.scale(h))?)?) / (2.0 * h);
    println!("directional derivative: analytic {:.8}, numeric {:.8}", g.dot(&d)?, numeric);

    // A step along -G shrinks every non-zero singular value by the same amount.
    let step = 0.05;
    let rank = numerical_rank(&svd(&a)?.sigma) as f64;
    let shrunk = a.sub(&g.scale(step))?;
    println!(
        "||A - {step} G||_* = {:.10} (expected {:.10})",
        nuclear_norm(&shrunk)?,
        nuclear_norm(&a)? - step * rank
    );
    Ok(())
}
