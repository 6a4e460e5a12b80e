//! Two-stage encoder–decoder segmentation of vertebrae in CT slices.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common single-precision case.

pub mod autograd;
pub mod blocks;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod network;
pub mod nn;
pub mod ops;
pub mod scalar;
pub mod tensor;
pub mod training;

pub use autograd::{Grads, Var};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;

pub type Tensor32 = Tensor<f32>;
pub type Var32 = Var<f32>;
pub type ParamStore32 = nn::ParamStore<f32>;
pub type Model32 = network::Model<f32>;
