//! Trained rank pruning for small convolutional networks.
//!
//! Convolution weights are periodically replaced during training by their
//! energy-thresholded truncated SVD, optionally with a nuclear-norm
//! sub-gradient added to every step, so the trained filters are already
//! low-rank and can be exported as cascaded pairs of cheaper convolutions
//! without a fine-tuning pass.
//!
//! * [`linalg`]: Jacobi SVD, truncation, nuclear norm, perturbation bounds.
//! * [`reshape`]: filter-bank matricizations, projection, cascade export, FLOPs.
//! * [`net`]: a tiny conv net with exact backprop and a binary container.
//! * [`data`]: seeded synthetic images and the IDX loader.
//! * [`trp`]: the training loop, rank trajectories and the monotonicity monitor.
//! * [`cli`]: the `train` / `decompose` / `eval` / `report` commands.

pub mod cli;
pub mod data;
pub mod error;
pub mod linalg;
pub mod net;
pub mod reshape;
pub mod trp;

pub use error::{Error, Result};
