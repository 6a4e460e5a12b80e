//! Differentiable tensor operations, implemented as methods on [`Var`](crate::autograd::Var).

mod broadcast;
mod conv;
mod elementwise;
mod linear;
mod norm;
mod pool;
mod resize;
mod shape;

pub use broadcast::broadcast_shape;
pub use conv::conv_out_extent;
pub use elementwise::{logistic, SIGMOID_FLOOR};
pub use norm::BatchStats;
pub use resize::{nearest_index, resize_bilinear_plane, resize_nearest_plane};
