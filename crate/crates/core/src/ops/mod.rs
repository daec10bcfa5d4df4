//! Value-level tensor kernels.
//!
//! Every function here is a pure map from input tensors to an output tensor.
//! The matching `*_backward` kernels are used by [`crate::Graph`] to
//! propagate adjoints; they can also be called directly.

mod conv;
mod elementwise;
mod matmul;
mod reduce;
mod shape;

pub use conv::{conv2d, conv2d_backward, conv3d, conv3d_backward, ConvGrads, Padding3};
pub use elementwise::{
    abs, add, binary_backward, broadcast_shape, div, mul, reduce_to_shape, relu, sub, BinaryOp,
};
pub use matmul::{matmul, matmul_backward};
pub use reduce::{mean_all, mean_axes, softmax, softmax_backward, sum_all};
pub use shape::{
    concat, inverse_permutation, narrow, permute, pixel_shuffle, pixel_unshuffle, transpose_last2,
};
