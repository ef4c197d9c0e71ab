//! Dense real linear algebra: Jacobi SVD, energy-thresholded truncation,
//! nuclear norm and its sub-gradient, and perturbation-bound checks.

mod bounds;
mod matrix;
mod norms;
mod svd;

pub use bounds::{check_low_rank_residual, check_mirsky, BoundReport, BOUND_SLACK};
pub use matrix::MatrixF64;
pub use norms::{
    frobenius_norm, nuclear_norm, nuclear_subgradient, numerical_rank, NUMERICAL_RANK_TOL,
};
pub use svd::{select_rank, svd, tsvd, SvdFactors, TsvdResult, MAX_SWEEPS};

pub(crate) use svd::{check_energy, truncate_by_energy};
