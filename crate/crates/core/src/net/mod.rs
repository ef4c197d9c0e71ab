//! Minimal convolutional network with hand-derived gradients.

mod conv;
mod io;
mod model;

pub use conv::{conv2d_same, conv2d_same_backward, Shape3};
pub use io::{FORMAT_VERSION, MAGIC};
pub use model::{
    argmax, softmax, Batch, Conv2d, Dense, EvalMetrics, ForwardOutput, GradientSet, Layer,
    NetworkModel, ParamGrad,
};
