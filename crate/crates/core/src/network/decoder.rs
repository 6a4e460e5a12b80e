use crate::autograd::Var;
use crate::blocks::{ConvBlock, RandomFeatureParams, SqueezeExcite, SqueezeKind};
use crate::error::Result;
use crate::network::config::ModelConfig;
use crate::nn::{ParamBuilder, Session};
use crate::scalar::Scalar;

/// Decoder stages: upsample ×2, concatenate skips, conv block, squeeze block.
#[derive(Clone, Debug)]
pub struct Decoder<T> {
    stages: Vec<(ConvBlock, SqueezeExcite<T>)>,
}

/// Seed of the random features in decoder `net`, stage `stage`.
pub(crate) fn rf_stage_seed(base: u64, net: usize, stage: usize) -> u64 {
    base ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(1 + (net * 8 + stage) as u64))
}

impl<T: Scalar> Decoder<T> {
    /// `skip_channels[i]` is the total width concatenated at stage `i`, listed
    /// deepest first.
    pub fn new(
        b: &mut ParamBuilder<'_, T>,
        in_channels: usize,
        skip_channels: &[usize],
        cfg: &ModelConfig,
        random_features: bool,
        net: usize,
    ) -> Result<Self> {
        let mut c = in_channels;
        let mut stages = Vec::new();
        let last = cfg.decoder_channels.len() - 1;
        for (i, (&w, &skip)) in cfg.decoder_channels.iter().zip(skip_channels).enumerate() {
            let mut sb = b.sub(&format!("stage{i}"));
            let block = ConvBlock::new(&mut sb.sub("conv"), c + skip, w)?;
            let rf = random_features && (!cfg.se_rf_last_stage_only || i == last);
            let kind = if rf {
                let bc = &cfg.block_cfg;
                SqueezeKind::RandomFeatures {
                    params: RandomFeatureParams::new(w, bc.rf_dim, bc.rf_sigma, rf_stage_seed(cfg.rf_seed, net, i))?,
                    resample_per_forward: bc.rf_resample_per_forward,
                }
            } else {
                SqueezeKind::Plain
            };
            let se = SqueezeExcite::new(&mut sb.sub("se"), w, cfg.block_cfg.se_reduction, kind)?;
            stages.push((block, se));
            c = w;
        }
        Ok(Decoder { stages })
    }

    /// `skips[i]` lists the tensors concatenated at stage `i`, deepest first.
    pub fn forward(&self, s: &Session<'_, T>, x: &Var<T>, skips: &[Vec<Var<T>>]) -> Var<T> {
        let mut y = x.clone();
        for ((block, se), skip) in self.stages.iter().zip(skips) {
            let (h, w) = (skip[0].shape()[2], skip[0].shape()[3]);
            let mut parts = vec![y.upsample_bilinear(h, w)];
            parts.extend(skip.iter().cloned());
            y = se.forward(s, &block.forward(s, &Var::concat(&parts, 1)));
        }
        y
    }

    pub fn squeeze_blocks(&self) -> impl Iterator<Item = &SqueezeExcite<T>> {
        self.stages.iter().map(|(_, se)| se)
    }
}
