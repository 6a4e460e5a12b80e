//! The two encoders: a dense-block or VGG-style backbone for the first
//! network and a plain conv encoder for the second.

use crate::autograd::Var;
use crate::blocks::ConvBlock;
use crate::error::Result;
use crate::network::config::{DenseSpec, ModelConfig};
use crate::nn::{BatchNorm2d, Conv2d, ParamBuilder, Session};
use crate::scalar::Scalar;

/// Skip taps (full, 1/2, 1/4, 1/8 resolution) and the 1/16 bottleneck input.
pub struct EncoderOutput<T: Scalar> {
    pub skips: Vec<Var<T>>,
    pub bottom: Var<T>,
}

#[derive(Clone, Debug)]
struct DenseLayer {
    bn1: BatchNorm2d,
    conv1: Conv2d,
    bn2: BatchNorm2d,
    conv2: Conv2d,
}

impl DenseLayer {
    fn forward<T: Scalar>(&self, s: &Session<'_, T>, x: &Var<T>) -> Var<T> {
        let y = self.conv1.forward(s, &self.bn1.forward(s, x).relu());
        self.conv2.forward(s, &self.bn2.forward(s, &y).relu())
    }
}

#[derive(Clone, Debug)]
struct Transition {
    bn: BatchNorm2d,
    conv: Conv2d,
}

/// Dense-block backbone: stem, four dense blocks with transitions between.
#[derive(Clone, Debug)]
pub struct DenseEncoder {
    stem_conv: Conv2d,
    stem_bn: BatchNorm2d,
    blocks: Vec<Vec<DenseLayer>>,
    transitions: Vec<Transition>,
    final_bn: BatchNorm2d,
    skip_channels: Vec<usize>,
    out_channels: usize,
}

impl DenseEncoder {
    pub fn new<T: Scalar>(b: &mut ParamBuilder<'_, T>, in_channels: usize, spec: &DenseSpec) -> Self {
        let mut c = spec.init_features;
        let stem_conv = Conv2d::new(&mut b.sub("stem.conv"), in_channels, c, 3, 1, false);
        let stem_bn = BatchNorm2d::new(&mut b.sub("stem.bn"), c);
        let mut skip_channels = vec![c];
        let mut blocks = Vec::new();
        let mut transitions = Vec::new();
        let inner = spec.bn_size * spec.growth_rate;
        for (bi, &depth) in spec.block_depths.iter().enumerate() {
            let mut layers = Vec::new();
            for li in 0..depth {
                let mut lb = b.sub(&format!("block{bi}.layer{li}"));
                layers.push(DenseLayer {
                    bn1: BatchNorm2d::new(&mut lb.sub("bn1"), c),
                    conv1: Conv2d::new(&mut lb.sub("conv1"), c, inner, 1, 1, false),
                    bn2: BatchNorm2d::new(&mut lb.sub("bn2"), inner),
                    conv2: Conv2d::new(&mut lb.sub("conv2"), inner, spec.growth_rate, 3, 1, false),
                });
                c += spec.growth_rate;
            }
            blocks.push(layers);
            if bi + 1 < spec.block_depths.len() {
                skip_channels.push(c);
                let next = ((c as f64 * spec.compression).floor() as usize).max(1);
                let mut tb = b.sub(&format!("transition{bi}"));
                transitions.push(Transition {
                    bn: BatchNorm2d::new(&mut tb.sub("bn"), c),
                    conv: Conv2d::new(&mut tb.sub("conv"), c, next, 1, 1, false),
                });
                c = next;
            }
        }
        let final_bn = BatchNorm2d::new(&mut b.sub("final_bn"), c);
        DenseEncoder { stem_conv, stem_bn, blocks, transitions, final_bn, skip_channels, out_channels: c }
    }

    fn forward<T: Scalar>(&self, s: &Session<'_, T>, x: &Var<T>) -> EncoderOutput<T> {
        let stem = self.stem_bn.forward(s, &self.stem_conv.forward(s, x)).relu();
        let mut skips = vec![stem.clone()];
        let mut y = stem.max_pool2x2();
        for (bi, layers) in self.blocks.iter().enumerate() {
            for layer in layers {
                let fresh = layer.forward(s, &y);
                y = Var::concat(&[y, fresh], 1);
            }
            if let Some(t) = self.transitions.get(bi) {
                skips.push(y.clone());
                y = t.conv.forward(s, &t.bn.forward(s, &y).relu()).avg_pool2x2();
            }
        }
        EncoderOutput { skips, bottom: self.final_bn.forward(s, &y).relu() }
    }
}

/// Stacked 3×3 conv + ReLU stages with max pooling, VGG style.
#[derive(Clone, Debug)]
pub struct VggEncoder {
    stages: Vec<Vec<Conv2d>>,
    skip_channels: Vec<usize>,
    out_channels: usize,
}

impl VggEncoder {
    pub fn new<T: Scalar>(b: &mut ParamBuilder<'_, T>, in_channels: usize, widths: &[usize], depths: &[usize]) -> Self {
        let mut c = in_channels;
        let mut stages = Vec::new();
        for (si, (&w, &d)) in widths.iter().zip(depths).enumerate() {
            let convs = (0..d)
                .map(|ci| {
                    let conv = Conv2d::new(&mut b.sub(&format!("stage{si}.conv{ci}")), c, w, 3, 1, true);
                    c = w;
                    conv
                })
                .collect();
            stages.push(convs);
        }
        let skip_channels = widths[..widths.len() - 1].to_vec();
        VggEncoder { stages, skip_channels, out_channels: c }
    }

    fn forward<T: Scalar>(&self, s: &Session<'_, T>, x: &Var<T>) -> EncoderOutput<T> {
        let mut skips = Vec::new();
        let mut y = x.clone();
        for (si, convs) in self.stages.iter().enumerate() {
            if si > 0 {
                skips.push(y.clone());
                y = y.max_pool2x2();
            }
            for conv in convs {
                y = conv.forward(s, &y).relu();
            }
        }
        EncoderOutput { skips, bottom: y }
    }
}

#[derive(Clone, Debug)]
pub enum FirstEncoder {
    Dense(DenseEncoder),
    Vgg(VggEncoder),
}

impl FirstEncoder {
    pub fn forward<T: Scalar>(&self, s: &Session<'_, T>, x: &Var<T>) -> EncoderOutput<T> {
        match self {
            FirstEncoder::Dense(e) => e.forward(s, x),
            FirstEncoder::Vgg(e) => e.forward(s, x),
        }
    }

    pub fn skip_channels(&self) -> &[usize] {
        match self {
            FirstEncoder::Dense(e) => &e.skip_channels,
            FirstEncoder::Vgg(e) => &e.skip_channels,
        }
    }

    pub fn out_channels(&self) -> usize {
        match self {
            FirstEncoder::Dense(e) => e.out_channels,
            FirstEncoder::Vgg(e) => e.out_channels,
        }
    }
}

/// Conv block then 2×2 max pooling per stage.
#[derive(Clone, Debug)]
pub struct PlainEncoder {
    stages: Vec<ConvBlock>,
}

impl PlainEncoder {
    pub fn new<T: Scalar>(b: &mut ParamBuilder<'_, T>, in_channels: usize, cfg: &ModelConfig) -> Result<Self> {
        let mut c = in_channels;
        let mut stages = Vec::new();
        for (i, &w) in cfg.encoder2_channels.iter().enumerate() {
            stages.push(ConvBlock::new(&mut b.sub(&format!("stage{i}")), c, w)?);
            c = w;
        }
        Ok(PlainEncoder { stages })
    }

    pub fn forward<T: Scalar>(&self, s: &Session<'_, T>, x: &Var<T>) -> EncoderOutput<T> {
        let mut skips = Vec::new();
        let mut y = x.clone();
        for stage in &self.stages {
            let tap = stage.forward(s, &y);
            y = tap.max_pool2x2();
            skips.push(tap);
        }
        EncoderOutput { skips, bottom: y }
    }
}
