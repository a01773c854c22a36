//! Differentiable layer primitives as explicit forward/backward pairs.
//!
//! These are pure functions over tensors; [`crate::autodiff::Tape`] records
//! them and chains the backward passes.

mod activation;
mod batchnorm;
mod conv;
mod dense;
mod loss;
mod pool;

use serde::{Deserialize, Serialize};

pub use activation::{dropout_backward, dropout_forward, relu_backward, relu_forward};
pub use batchnorm::{
    batchnorm3d, batchnorm3d_backward, batchnorm3d_forward, BnConfig, BnGrads, BnSaved, BnState,
};
pub use conv::{conv3d_backward, conv3d_direct, conv3d_forward, ConvGrads};
pub use dense::{dense_backward, dense_forward, DenseGrads};
pub use loss::{softmax, softmax_xent_backward, softmax_xent_forward};
pub use pool::{
    avgpool3d_global_backward, avgpool3d_global_forward, maxpool3d_backward, maxpool3d_forward,
    MaxPoolSaved, PADDING,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}
