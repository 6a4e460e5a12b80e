use serde::{Deserialize, Serialize};

use crate::blocks::BlockConfig;
use crate::error::{Error, Result};

/// Which of the two architectures a configuration builds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Dense encoder, spatial attention, PSA and random-feature squeeze blocks.
    PlusPlus,
    /// VGG-style encoder with plain squeeze blocks.
    Baseline,
}

impl Architecture {
    pub fn tag(self) -> &'static str {
        match self {
            Architecture::PlusPlus => "doubleunet_pp",
            Architecture::Baseline => "doubleunet",
        }
    }

    /// Short name used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Architecture::PlusPlus => "plusplus",
            Architecture::Baseline => "baseline",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "plusplus" | "doubleunet_pp" => Some(Architecture::PlusPlus),
            "baseline" | "doubleunet" => Some(Architecture::Baseline),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Full,
    Desk,
}

impl Scale {
    /// Width and depth divisor applied by the desk preset.
    pub const DESK_DIVISOR: usize = 4;

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" => Some(Scale::Full),
            "desk" => Some(Scale::Desk),
            _ => None,
        }
    }
}

/// Dense-block backbone of the first encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseSpec {
    pub growth_rate: usize,
    pub init_features: usize,
    /// Layers per dense block; one block per downsampling stage.
    pub block_depths: Vec<usize>,
    /// Bottleneck width of each dense layer as a multiple of the growth rate.
    pub bn_size: usize,
    pub compression: f64,
}

/// Every architecture hyperparameter of both networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_size: (usize, usize),
    pub in_channels: usize,
    pub encoder1: DenseSpec,
    /// Stage widths of the VGG-style encoder used by the baseline; the last
    /// stage runs at the bottleneck resolution.
    pub vgg_channels: Vec<usize>,
    pub vgg_depths: Vec<usize>,
    pub encoder2_channels: Vec<usize>,
    pub decoder_channels: Vec<usize>,
    pub block_cfg: BlockConfig,
    pub rf_seed: u64,
    pub init_seed: u64,
    /// Use random-feature squeeze blocks only in the last decoder stage.
    #[serde(default)]
    pub se_rf_last_stage_only: bool,
    pub scale: Scale,
}

impl ModelConfig {
    pub const STAGES: usize = 4;
    /// Required divisor of the input height and width.
    pub const SPATIAL_MULTIPLE: usize = 16;

    pub fn full() -> Self {
        ModelConfig {
            input_size: (256, 256),
            in_channels: 1,
            encoder1: DenseSpec {
                growth_rate: 32,
                init_features: 64,
                block_depths: vec![6, 12, 24, 16],
                bn_size: 4,
                compression: 0.5,
            },
            vgg_channels: vec![64, 128, 256, 512, 512],
            vgg_depths: vec![2, 2, 4, 4, 4],
            encoder2_channels: vec![32, 64, 128, 256],
            decoder_channels: vec![256, 128, 64, 32],
            block_cfg: BlockConfig::default(),
            rf_seed: 17,
            init_seed: 0,
            se_rf_last_stage_only: false,
            scale: Scale::Full,
        }
    }

    /// The full preset with widths and block depths divided by
    /// [`Scale::DESK_DIVISOR`] and 64×64 inputs.
    pub fn desk() -> Self {
        let d = Scale::DESK_DIVISOR;
        let full = Self::full();
        let shrink = |v: &[usize]| v.iter().map(|&x| (x / d).max(1)).collect::<Vec<_>>();
        ModelConfig {
            input_size: (64, 64),
            encoder1: DenseSpec {
                growth_rate: full.encoder1.growth_rate / d,
                init_features: full.encoder1.init_features / d,
                block_depths: shrink(&full.encoder1.block_depths),
                ..full.encoder1.clone()
            },
            vgg_channels: shrink(&full.vgg_channels),
            vgg_depths: shrink(&full.vgg_depths),
            encoder2_channels: shrink(&full.encoder2_channels),
            decoder_channels: shrink(&full.decoder_channels),
            block_cfg: BlockConfig {
                out_channels: full.block_cfg.out_channels / d,
                rf_dim: full.block_cfg.rf_dim / d,
                ..full.block_cfg.clone()
            },
            scale: Scale::Desk,
            ..full
        }
    }

    pub fn for_scale(scale: Scale) -> Self {
        match scale {
            Scale::Full => Self::full(),
            Scale::Desk => Self::desk(),
        }
    }

    pub fn validate(&self, arch: Architecture) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.block_cfg.validate()?;
        let stages = Self::STAGES;
        if self.encoder1.block_depths.len() != stages
            || self.encoder2_channels.len() != stages
            || self.decoder_channels.len() != stages
        {
            return bad(format!("encoders and decoders need exactly {stages} stages"));
        }
        if self.vgg_channels.len() != stages + 1 || self.vgg_depths.len() != stages + 1 {
            return bad(format!("the VGG encoder needs {} stages", stages + 1));
        }
        let widths = [
            &self.encoder2_channels[..],
            &self.decoder_channels[..],
            &self.vgg_channels[..],
            &self.vgg_depths[..],
            &self.encoder1.block_depths[..],
        ];
        if widths.iter().any(|w| w.contains(&0)) || self.in_channels == 0 {
            return bad("all widths and depths must be positive".into());
        }
        let dense = &self.encoder1;
        if dense.growth_rate == 0 || dense.init_features == 0 || dense.bn_size == 0 {
            return bad("dense encoder widths must be positive".into());
        }
        if !(dense.compression > 0.0 && dense.compression <= 1.0) {
            return bad(format!("compression must be in (0, 1], got {}", dense.compression));
        }
        if let Some(&w) = self.decoder_channels.iter().find(|&&w| w / self.block_cfg.se_reduction == 0) {
            return bad(format!("decoder width {w} is below the squeeze reduction {}", self.block_cfg.se_reduction));
        }
        if arch == Architecture::PlusPlus && self.block_cfg.out_channels % self.block_cfg.psa_groups != 0 {
            return bad(format!(
                "{} PSA groups do not divide the ASPP width {}",
                self.block_cfg.psa_groups, self.block_cfg.out_channels
            ));
        }
        let (h, w) = self.input_size;
        if h % Self::SPATIAL_MULTIPLE != 0 || w % Self::SPATIAL_MULTIPLE != 0 {
            return bad(format!("input size {h}×{w} must be divisible by {}", Self::SPATIAL_MULTIPLE));
        }
        Ok(())
    }
}
