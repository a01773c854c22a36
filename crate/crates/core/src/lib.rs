//! Volumetric wide residual networks for 3D shape classification.
//!
//! The crate covers the whole path from OFF meshes to ensembled predictions:
//!
//! - [`tensor`]: dense `(n, c, d, h, w)` tensors, matmul and patch lowering
//! - [`ops`] and [`autodiff`]: differentiable layers and the reverse-mode tape
//! - [`network`]: the widened residual architecture, parameter counts, checkpoints
//! - [`data`]: OFF parsing, mesh normalization and rotation, voxelization, batching
//! - [`optim`]: Nesterov SGD, Nadam, and the plateau learning-rate schedule
//! - [`train`]: training loop, metrics, snapshot/independent ensembles, sweeps
//! - [`gradcheck`]: finite-difference verification of every differentiable op

pub mod autodiff;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod network;
pub mod ops;
pub mod optim;
pub mod tensor;
pub mod train;
pub mod util;

pub use error::{Error, Result};
pub use tensor::{AnyTensor, DType, Scalar, Shape5, Tensor};
