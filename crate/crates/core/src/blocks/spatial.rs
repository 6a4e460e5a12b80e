use crate::autograd::Var;
use crate::blocks::{FeatureMap, SpatialAttentionMap};
use crate::error::{Error, Result};
use crate::nn::{Conv2d, ParamBuilder, ParamStore, Session};
use crate::scalar::Scalar;

pub const SPATIAL_KERNEL: usize = 7;

/// Spatial attention: channel mean and max are stacked, convolved to one
/// channel and squashed into a map that reweights every channel.
#[derive(Clone, Debug)]
pub struct SpatialAttention {
    conv: Conv2d,
}

impl SpatialAttention {
    pub fn new<T: Scalar>(b: &mut ParamBuilder<'_, T>) -> Self {
        SpatialAttention { conv: Conv2d::new(&mut b.sub("conv"), 2, 1, SPATIAL_KERNEL, 1, false) }
    }

    /// Returns the refined features and the `N×1×H×W` map.
    pub fn forward<T: Scalar>(&self, s: &Session<'_, T>, x: &Var<T>) -> (Var<T>, Var<T>) {
        let pooled = Var::concat(&[x.channel_mean(), x.channel_max()], 1);
        let map = self.conv.forward(s, &pooled).sigmoid();
        (x.mul_bcast(&map), map)
    }

    pub fn apply<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        x: &FeatureMap<T>,
    ) -> Result<(FeatureMap<T>, SpatialAttentionMap<T>)> {
        let s = Session::eval(store);
        let (y, m) = self.forward(&s, &x.to_batch());
        let map = m.value().clone().reshape(&[1, x.height(), x.width()])?;
        if !map.all_finite() {
            return Err(Error::InvalidInput("non-finite attention map".into()));
        }
        Ok((FeatureMap::from_batch(&y)?, SpatialAttentionMap { data: map }))
    }
}
