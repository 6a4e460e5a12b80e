use crate::autograd::Var;
use crate::blocks::{apply_eval, FeatureMap};
use crate::error::{Error, Result};
use crate::nn::{BatchNorm2d, Conv2d, ParamBuilder, ParamStore, Session};
use crate::scalar::Scalar;

/// Two rounds of 3×3 convolution, batch norm and ReLU.
#[derive(Clone, Debug)]
pub struct ConvBlock {
    conv1: Conv2d,
    bn1: BatchNorm2d,
    conv2: Conv2d,
    bn2: BatchNorm2d,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl ConvBlock {
    pub fn new<T: Scalar>(b: &mut ParamBuilder<'_, T>, in_channels: usize, out_channels: usize) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 {
            return Err(Error::Config(format!("conv block needs positive widths, got {in_channels}→{out_channels}")));
        }
        Ok(ConvBlock {
            conv1: Conv2d::new(&mut b.sub("conv1"), in_channels, out_channels, 3, 1, true),
            bn1: BatchNorm2d::new(&mut b.sub("bn1"), out_channels),
            conv2: Conv2d::new(&mut b.sub("conv2"), out_channels, out_channels, 3, 1, true),
            bn2: BatchNorm2d::new(&mut b.sub("bn2"), out_channels),
            in_channels,
            out_channels,
        })
    }

    pub fn forward<T: Scalar>(&self, s: &Session<'_, T>, x: &Var<T>) -> Var<T> {
        let y = self.bn1.forward(s, &self.conv1.forward(s, x)).relu();
        self.bn2.forward(s, &self.conv2.forward(s, &y)).relu()
    }

    pub fn apply<T: Scalar>(&self, store: &ParamStore<T>, x: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        apply_eval(store, x, self.in_channels, |s, v| self.forward(s, v))
    }
}
