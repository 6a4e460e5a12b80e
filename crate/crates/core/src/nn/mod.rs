//! Parameters and the basic trainable layers.

mod layers;
mod params;

pub use layers::{BatchNorm2d, Conv2d, Linear, BN_EPS, BN_MOMENTUM};
pub use params::{Mode, ParamBuilder, ParamEntry, ParamId, ParamKind, ParamStore, Session};
